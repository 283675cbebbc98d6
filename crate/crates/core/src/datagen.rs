//! Seeded generators for the measurement-matrix families, coefficient
//! vectors and noise, plus a plain-CSV matrix loader.
//!
//! All randomness is ChaCha8 keyed by seeds derived from one master seed, so
//! the matrix, coefficient and noise streams are independent: changing the
//! noise level never changes `X` or `β⁰`.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{AssdError, Result};
use crate::seed;

/// Name of the PRNG, recorded in experiment metadata.
pub const PRNG_NAME: &str = "ChaCha8";

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MatrixFamily {
    /// Entries i.i.d. standard normal.
    IidGaussian,
    /// Rows drawn from N(0, Σ) with Σᵢⱼ = π^|i−j|, realized by the AR(1)
    /// recursion xⱼ = π·xⱼ₋₁ + √(1−π²)·zⱼ.
    Ar1Gaussian { pi: f64 },
    /// Rank-r product of two i.i.d. Gaussian factors (n×r)·(r×p).
    Structured { r: usize },
    /// Numeric CSV file, subsampled to (n, p) without replacement.
    CsvFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MatrixSpec {
    #[serde(flatten)]
    pub family: MatrixFamily,
    pub n: usize,
    pub p: usize,
    /// Z-score the columns after generation (off by default).
    #[serde(default)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CoeffLaw {
    /// Values i.i.d. U[lo, hi].
    UniformPos { lo: f64, hi: f64 },
    /// Values i.i.d. U[lo, hi] or U[−hi, −lo] with equal probability.
    SignedUniform { lo: f64, hi: f64 },
    /// U[lo, hi] on the support; every off-support entry set to `tail`.
    WeakSparse { lo: f64, hi: f64, tail: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoeffSpec {
    pub s0: usize,
    #[serde(flatten)]
    pub law: CoeffLaw,
}

/// One generated regression problem.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta0: Option<DVector<f64>>,
    pub sigma: f64,
    pub seed: u64,
    /// Compression ratio n/p.
    pub alpha: f64,
    /// Sparsity ratio s0/p.
    pub rho: f64,
}

fn validate_spec(spec: &MatrixSpec) -> Result<()> {
    if spec.n == 0 || spec.p == 0 {
        return Err(AssdError::InvalidInput("matrix dims must be positive".into()));
    }
    match &spec.family {
        MatrixFamily::Ar1Gaussian { pi } => {
            if !(0.0..1.0).contains(pi) {
                return Err(AssdError::InvalidInput(format!(
                    "ar1 correlation must lie in [0, 1), got {pi}"
                )));
            }
        }
        MatrixFamily::Structured { r } => {
            if *r == 0 {
                return Err(AssdError::InvalidInput("structured rank must be >= 1".into()));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Sample `k` indices from `0..len` without replacement (partial
/// Fisher-Yates).
fn sample_without_replacement(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..k {
        let j = rng.random_range(i..len);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

fn standardize_columns(x: &mut DMatrix<f64>) {
    let n = x.nrows();
    if n < 2 {
        return;
    }
    for j in 0..x.ncols() {
        let mut col = x.column_mut(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (n as f64 - 1.0)).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
}

/// Generate a measurement matrix for `spec` from `seed`.
pub fn gen_matrix(spec: &MatrixSpec, seed: u64) -> Result<DMatrix<f64>> {
    validate_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (spec.n, spec.p);

    let mut x = match &spec.family {
        MatrixFamily::IidGaussian => {
            // row-major fill for a stable stream layout across families
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                for j in 0..p {
                    x[(i, j)] = rng.sample(StandardNormal);
                }
            }
            x
        }
        MatrixFamily::Ar1Gaussian { pi } => {
            let c = (1.0 - pi * pi).sqrt();
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                let mut prev: f64 = rng.sample(StandardNormal);
                x[(i, 0)] = prev;
                for j in 1..p {
                    let z: f64 = rng.sample(StandardNormal);
                    prev = pi * prev + c * z;
                    x[(i, j)] = prev;
                }
            }
            x
        }
        MatrixFamily::Structured { r } => {
            let x1 = DMatrix::from_fn(n, *r, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x2 = DMatrix::from_fn(*r, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            x1 * x2
        }
        MatrixFamily::CsvFile { path } => {
            let full = load_csv_matrix(path)?;
            if full.nrows() < n || full.ncols() < p {
                return Err(AssdError::InvalidInput(format!(
                    "csv matrix is {}x{}, smaller than requested {}x{}",
                    full.nrows(),
                    full.ncols(),
                    n,
                    p
                )));
            }
            let rows = sample_without_replacement(&mut rng, full.nrows(), n);
            let cols = sample_without_replacement(&mut rng, full.ncols(), p);
            DMatrix::from_fn(n, p, |i, j| full[(rows[i], cols[j])])
        }
    };

    if spec.standardize {
        standardize_columns(&mut x);
    }
    Ok(x)
}

/// Generate a coefficient vector of length `p` for `spec` from `seed`.
pub fn gen_coeffs(spec: &CoeffSpec, p: usize, seed: u64) -> Result<DVector<f64>> {
    if spec.s0 > p {
        return Err(AssdError::InvalidInput(format!(
            "s0 = {} exceeds p = {p}",
            spec.s0
        )));
    }
    let (lo, hi) = match spec.law {
        CoeffLaw::UniformPos { lo, hi }
        | CoeffLaw::SignedUniform { lo, hi }
        | CoeffLaw::WeakSparse { lo, hi, .. } => (lo, hi),
    };
    if lo >= hi {
        return Err(AssdError::InvalidInput(format!(
            "coefficient law needs lo < hi, got [{lo}, {hi}]"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = sample_without_replacement(&mut rng, p, spec.s0);

    let mut beta = match spec.law {
        CoeffLaw::WeakSparse { tail, .. } => DVector::from_element(p, tail),
        _ => DVector::zeros(p),
    };
    for &i in &support {
        let magnitude = rng.random_range(lo..hi);
        let value = match spec.law {
            CoeffLaw::SignedUniform { .. } => {
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            _ => magnitude,
        };
        beta[i] = value;
    }
    Ok(beta)
}

/// Generate a full instance `y = Xβ⁰ + ε` with `ε ~ N(0, σ²)`.
///
/// Sub-seeds for the matrix, coefficient and noise streams are derived
/// deterministically from the master `seed`.
pub fn gen_instance(
    mspec: &MatrixSpec,
    cspec: &CoeffSpec,
    sigma: f64,
    master_seed: u64,
) -> Result<ProblemInstance> {
    gen_instance_with_matrix_seed(mspec, cspec, sigma, master_seed, None)
}

/// As [`gen_instance`], but with an optional fixed matrix seed so that
/// repeats can share one `X`.
pub fn gen_instance_with_matrix_seed(
    mspec: &MatrixSpec,
    cspec: &CoeffSpec,
    sigma: f64,
    master_seed: u64,
    matrix_seed: Option<u64>,
) -> Result<ProblemInstance> {
    if sigma < 0.0 {
        return Err(AssdError::InvalidInput("sigma must be nonnegative".into()));
    }
    let x = gen_matrix(
        mspec,
        matrix_seed.unwrap_or_else(|| seed::mix(master_seed, seed::STREAM_MATRIX)),
    )?;
    let beta0 = gen_coeffs(cspec, mspec.p, seed::mix(master_seed, seed::STREAM_COEFF))?;
    let mut y = &x * &beta0;
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(master_seed, seed::STREAM_NOISE));
        for i in 0..y.len() {
            y[i] += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(ProblemInstance {
        alpha: mspec.n as f64 / mspec.p as f64,
        rho: cspec.s0 as f64 / mspec.p as f64,
        x,
        y,
        beta0: Some(beta0),
        sigma,
        seed: master_seed,
    })
}

/// Load a plain numeric CSV matrix: one row per line, comma-separated
/// decimal literals; a single leading line starting with '#' is skipped.
pub fn load_csv_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('#')) {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    AssdError::Parse(format!(
                        "{}:{}: not a number: '{}'",
                        path.display(),
                        lineno + 1,
                        tok.trim()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(AssdError::Parse(format!(
                    "{}:{}: ragged row ({} fields, expected {})",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(AssdError::Parse(format!("{}: empty matrix", path.display())));
    }
    let (n, p) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

/// Load a vector: one value per line (an optional leading '#' line is
/// skipped).
pub fn load_csv_vector(path: &Path) -> Result<DVector<f64>> {
    let m = load_csv_matrix(path)?;
    if m.ncols() == 1 {
        Ok(DVector::from_iterator(m.nrows(), m.iter().copied()))
    } else if m.nrows() == 1 {
        Ok(DVector::from_iterator(m.ncols(), m.iter().copied()))
    } else {
        Err(AssdError::Parse(format!(
            "{}: expected a vector, got {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn write_csv_matrix(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| format!("{}", x[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_csv_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for val in v.iter() {
        writeln!(out, "{val}")?;
    }
    Ok(())
}
