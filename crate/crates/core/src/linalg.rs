//! Dense numerical kernels: minimum-norm least squares, column deflation and
//! support refits.
//!
//! The minimum-norm solve goes through the n-by-n Gram system
//! `(X Xᵀ) z = y`, `γ̂ = Xᵀ z`, which is much cheaper than an SVD when
//! `n ≪ p`. The identity `X⁺ = Xᵀ (X Xᵀ)⁺` makes this exact even for
//! rank-deficient or tall matrices, provided the Gram system is solved in the
//! pseudo-inverse sense; a symmetric eigendecomposition backs the Cholesky
//! route up when the factorization is unusable.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{AssdError, Result};

/// Default relative cutoff for treating singular values / pivots as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// A column whose norm falls below this fraction of the largest original
/// column norm is ineligible for selection and deflation.
pub const DEFAULT_PIVOT_FLOOR_REL: f64 = 1e-10;

pub(crate) fn check_finite_matrix(x: &DMatrix<f64>, name: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(AssdError::NonFiniteInput(format!(
            "matrix {name} contains a non-finite entry"
        )))
    }
}

pub(crate) fn check_finite_vector(v: &DVector<f64>, name: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(AssdError::NonFiniteInput(format!(
            "vector {name} contains a non-finite entry"
        )))
    }
}

/// `X Xᵀ`, the n-by-n Gram matrix of the rows.
pub(crate) fn row_gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    x * x.transpose()
}

/// Solve `G z = rhs` for symmetric positive semi-definite `G` in the
/// pseudo-inverse sense. Route: plain Cholesky, then Cholesky with a diagonal
/// jitter, then a symmetric eigendecomposition with small eigenvalues zeroed.
pub(crate) fn gram_solve(g: &DMatrix<f64>, rhs: &DVector<f64>, rank_tol: f64) -> DVector<f64> {
    let scale = rhs.norm();
    if scale == 0.0 {
        return DVector::zeros(g.nrows());
    }

    let rel_res = |z: &DVector<f64>| (g * z - rhs).norm() / scale;

    if let Some(chol) = Cholesky::new(g.clone()) {
        let z = chol.solve(rhs);
        if rel_res(&z) <= 1e-10 {
            return z;
        }
    }

    // Jitter keeps the factorization alive on the singular Gram matrices that
    // arise once deflation has reduced the row space. The null components of
    // rhs are (numerically) zero there, so the perturbation is benign.
    let max_diag = g.diagonal().amax().max(f64::MIN_POSITIVE);
    let jitter = rank_tol.max(1e-14) * max_diag;
    let mut gj = g.clone();
    for i in 0..gj.nrows() {
        gj[(i, i)] += jitter;
    }
    if let Some(chol) = Cholesky::new(gj) {
        let z = chol.solve(rhs);
        if rel_res(&z) <= 1e-8 {
            return z;
        }
    }

    let eig = SymmetricEigen::new(g.clone());
    let cutoff = rank_tol.max(f64::EPSILON) * eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let mut z = DVector::zeros(g.nrows());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cutoff {
            let q = eig.eigenvectors.column(i);
            z.axpy(q.dot(rhs) / ev, &q, 1.0);
        }
    }
    z
}

/// Minimum Euclidean-norm least-squares solution `γ̂ = X⁺ y`.
///
/// Singular values at or below `rank_tol` times the largest are treated as
/// zero.
pub fn min_norm_least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    rank_tol: f64,
) -> Result<DVector<f64>> {
    if y.len() != x.nrows() {
        return Err(AssdError::DimensionMismatch(format!(
            "y has length {} but X has {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if rank_tol < 0.0 {
        return Err(AssdError::InvalidInput("rank_tol must be nonnegative".into()));
    }
    check_finite_matrix(x, "X")?;
    check_finite_vector(y, "y")?;

    let g = row_gram(x);
    let z = gram_solve(&g, y, rank_tol);
    Ok(x.transpose() * z)
}

/// Eq.-style column deflation: `Xi − (Xiᵀ Xk / Xkᵀ Xk) Xk`.
///
/// The result is orthogonal to `Xk` up to numerical tolerance. `floor` is the
/// minimum admissible pivot norm.
pub fn deflate_column(xi: &DVector<f64>, xk: &DVector<f64>, floor: f64) -> Result<DVector<f64>> {
    if xi.len() != xk.len() {
        return Err(AssdError::DimensionMismatch(format!(
            "deflation vectors have lengths {} and {}",
            xi.len(),
            xk.len()
        )));
    }
    let nk = xk.norm();
    if nk <= floor || nk == 0.0 {
        return Err(AssdError::DegeneratePivot {
            index: 0,
            norm: nk,
            floor,
        });
    }
    Ok(xi - xk * (xi.dot(xk) / (nk * nk)))
}

/// Residual deflation against a pivot column; same contract as
/// [`deflate_column`] with `Xi := y`.
pub fn deflate_residual(y: &DVector<f64>, xk: &DVector<f64>, floor: f64) -> Result<DVector<f64>> {
    deflate_column(y, xk, floor)
}

/// Least-squares refit of `y` on the columns of `X` indexed by `support`.
///
/// Returns one coefficient per support index, in support order. Rank-deficient
/// submatrices get the minimum-norm minimizer. An empty support yields an
/// empty vector.
pub fn refit_on_support(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    support: &[usize],
    rank_tol: f64,
) -> Result<DVector<f64>> {
    if support.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let n = x.nrows();
    if y.len() != n {
        return Err(AssdError::DimensionMismatch(format!(
            "y has length {} but X has {} rows",
            y.len(),
            n
        )));
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= x.ncols()) {
        return Err(AssdError::InvalidInput(format!(
            "support index {bad} out of range for {} columns",
            x.ncols()
        )));
    }
    if support.len() > n {
        log::warn!(
            "refit support size {} exceeds the row count {}; solution is not unique",
            support.len(),
            n
        );
    }

    let mut xs = DMatrix::zeros(n, support.len());
    for (j, &i) in support.iter().enumerate() {
        xs.set_column(j, &x.column(i));
    }
    let svd = xs.svd(true, true);
    let eps = rank_tol.max(f64::EPSILON) * svd.singular_values.amax().max(f64::MIN_POSITIVE);
    svd.solve(y, eps)
        .map_err(|e| AssdError::InvalidInput(format!("refit SVD solve failed: {e}")))
}

/// A guidance vector together with its magnitude ranking.
///
/// `ranking` is a permutation of the stored column indices, sorted by
/// descending magnitude with ties broken by ascending column index.
#[derive(Debug, Clone)]
pub struct GuidanceVector {
    indices: Vec<usize>,
    values: Vec<f64>,
    ranking: Vec<usize>,
}

impl GuidanceVector {
    /// Build from parallel lists of column indices and guidance values.
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(AssdError::DimensionMismatch(
                "guidance indices and values differ in length".into(),
            ));
        }
        let mut order: Vec<usize> = (0..indices.len()).collect();
        order.sort_by(|&a, &b| {
            values[b]
                .abs()
                .partial_cmp(&values[a].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(indices[a].cmp(&indices[b]))
        });
        let ranking = order.into_iter().map(|pos| indices[pos]).collect();
        Ok(Self {
            indices,
            values,
            ranking,
        })
    }

    /// Guidance over all columns of a dense solution vector.
    pub fn from_dense(gamma: &DVector<f64>) -> Self {
        Self::new((0..gamma.len()).collect(), gamma.iter().copied().collect())
            .expect("parallel lists by construction")
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices sorted by descending guidance magnitude.
    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    /// The leading (largest-magnitude) column index.
    pub fn leading(&self) -> Option<usize> {
        self.ranking.first().copied()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}
