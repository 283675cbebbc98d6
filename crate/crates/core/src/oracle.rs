//! Slow reference implementations used by tests: full-SVD pseudo-inverse,
//! exact noiseless guidance, brute-force best-subset search and exhaustive
//! BIC minimization over magnitude-nested supports.
//!
//! These routes are deliberately independent of the fast Gram-based solver in
//! [`crate::linalg`]; correctness is pinned by the Moore-Penrose identities,
//! not by agreement of factorization routines.

use nalgebra::{DMatrix, DVector};

use crate::error::{AssdError, Result};
use crate::linalg::refit_on_support;
use crate::threshold::bic_score;

/// Singular value decomposition `X = U D Vᵀ` with the row-space factor
/// `V₁ ∈ ℝ^{p×k}`, `k = min(n, p)`, columns ordered by descending singular
/// value.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v1: DMatrix<f64>,
}

impl SvdFactors {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let svd = x.clone().svd(true, true);
        SvdFactors {
            u: svd.u.expect("requested U"),
            singular_values: svd.singular_values,
            v1: svd.v_t.expect("requested Vt").transpose(),
        }
    }
}

/// Moore-Penrose pseudo-inverse `X⁺ = V₁ D₁⁺ Uᵀ` via full SVD.
///
/// Singular values at or below `rank_tol` times the largest are zeroed.
pub fn pinv_via_svd(x: &DMatrix<f64>, rank_tol: f64) -> DMatrix<f64> {
    let f = SvdFactors::new(x);
    let smax = f.singular_values.amax().max(f64::MIN_POSITIVE);
    let cutoff = rank_tol.max(f64::EPSILON) * smax;
    let k = f.singular_values.len();
    let mut d_inv = DMatrix::zeros(k, k);
    for i in 0..k {
        if f.singular_values[i] > cutoff {
            d_inv[(i, i)] = 1.0 / f.singular_values[i];
        }
    }
    &f.v1 * d_inv * f.u.transpose()
}

/// Exact noiseless guidance `γ = V₁ V₁ᵀ β⁰`, restricted to the positive
/// singular directions.
pub fn exact_guidance_noiseless(
    x: &DMatrix<f64>,
    beta0: &DVector<f64>,
    rank_tol: f64,
) -> Result<DVector<f64>> {
    if beta0.len() != x.ncols() {
        return Err(AssdError::DimensionMismatch(format!(
            "beta0 has length {} but X has {} columns",
            beta0.len(),
            x.ncols()
        )));
    }
    let f = SvdFactors::new(x);
    let smax = f.singular_values.amax().max(f64::MIN_POSITIVE);
    let cutoff = rank_tol.max(f64::EPSILON) * smax;
    let mut gamma = DVector::zeros(x.ncols());
    for i in 0..f.singular_values.len() {
        if f.singular_values[i] > cutoff {
            let v = f.v1.column(i);
            gamma.axpy(v.dot(beta0), &v, 1.0);
        }
    }
    Ok(gamma)
}

/// Overlap matrix `Q = V₁ V₁ᵀ` whose entries drive the guidance diagnostics.
/// Intended for small `p` only.
pub fn overlap_matrix(x: &DMatrix<f64>, rank_tol: f64) -> DMatrix<f64> {
    let f = SvdFactors::new(x);
    let smax = f.singular_values.amax().max(f64::MIN_POSITIVE);
    let cutoff = rank_tol.max(f64::EPSILON) * smax;
    let p = x.ncols();
    let mut q = DMatrix::zeros(p, p);
    for i in 0..f.singular_values.len() {
        if f.singular_values[i] > cutoff {
            let v = f.v1.column(i);
            q.ger(1.0, &v, &v, 1.0);
        }
    }
    q
}

/// Exhaustive best-subset search: the support of size at most `k_max`
/// minimizing the least-squares residual norm. Ties prefer fewer columns,
/// then the lexicographically smallest support.
pub fn best_subset_bruteforce(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    k_max: usize,
) -> Result<(Vec<usize>, DVector<f64>)> {
    let p = x.ncols();
    if p > 16 {
        return Err(AssdError::InvalidInput(format!(
            "best_subset_bruteforce refuses p = {p} > 16"
        )));
    }
    if y.len() != x.nrows() {
        return Err(AssdError::DimensionMismatch(
            "y length does not match X rows".into(),
        ));
    }
    let k_max = k_max.min(p);
    let tie_tol = 1e-10 * y.norm().max(1.0);

    let mut best_support: Vec<usize> = Vec::new();
    let mut best_beta = DVector::zeros(0);
    let mut best_res = y.norm();
    for mask in 0u32..(1 << p) {
        let support: Vec<usize> = (0..p).filter(|i| mask & (1 << i) != 0).collect();
        if support.is_empty() || support.len() > k_max {
            continue;
        }
        let beta = refit_on_support(x, y, &support, 1e-12)?;
        let mut residual = y.clone();
        for (j, &i) in support.iter().enumerate() {
            residual.axpy(-beta[j], &x.column(i), 1.0);
        }
        let res = residual.norm();
        let better = res < best_res - tie_tol
            || (res <= best_res + tie_tol
                && (support.len() < best_support.len()
                    || (support.len() == best_support.len() && support < best_support)));
        if better {
            best_res = res;
            best_support = support;
            best_beta = beta;
        }
    }
    Ok((best_support, best_beta))
}

/// Minimum BIC over the magnitude-nested family of `selected`: of all
/// 2^|selected| subsets, only those obtained by keeping the top-k entries of
/// `stage1_beta` by magnitude (k = |selected| down to 0) are admissible.
/// Each candidate support is refit before scoring. Ties keep the larger
/// support. Returns the dense coefficient vector of the winner and its BIC.
pub fn nested_bic_min(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    stage1_beta: &DVector<f64>,
    selected: &[usize],
    rank_tol: f64,
) -> Result<(DVector<f64>, f64)> {
    let p = x.ncols();
    let mut order: Vec<usize> = selected.to_vec();
    order.sort_by(|&a, &b| {
        stage1_beta[b]
            .abs()
            .partial_cmp(&stage1_beta[a].abs())
            .expect("finite coefficients")
    });

    let mut best: Option<(DVector<f64>, f64)> = None;
    for k in (0..=order.len()).rev() {
        let support = &order[..k];
        let coeffs = refit_on_support(x, y, support, rank_tol)?;
        let mut beta = DVector::zeros(p);
        for (j, &i) in support.iter().enumerate() {
            beta[i] = coeffs[j];
        }
        let bic = bic_score(y, x, &beta);
        if best.as_ref().is_none_or(|(_, b)| bic < *b) {
            best = Some((beta, bic));
        }
    }
    Ok(best.expect("the empty support is always scored"))
}
