//! Stage 1: shortest-solution guided decimation.
//!
//! Each step solves the minimum-norm least-squares problem on the current
//! deflated matrix, selects the leading guidance index, and projects every
//! remaining active column and the residual orthogonal to the pivot column.
//!
//! The n-by-n Gram matrix of the active columns is maintained incrementally:
//! deflating against pivot `v` maps the matrix to `P X'` with
//! `P = I − v vᵀ / (vᵀ v)`, so the Gram update is the congruence `G ← P G P`,
//! three rank-one updates instead of an O(n²·p) rebuild.

use nalgebra::{DMatrix, DVector};

use crate::error::{AssdError, Result};
use crate::linalg::{
    check_finite_matrix, check_finite_vector, gram_solve, refit_on_support, row_gram,
    DEFAULT_PIVOT_FLOOR_REL,
};

/// Why a decimation run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `‖y′‖₂` fell to the early-stopping level `η`.
    EtaHit,
    /// The step budget `L_max` was exhausted.
    LMaxHit,
    /// The per-sample `ℓ₁` residual fell below the naive tolerance.
    L1Hit,
    /// Every remaining active column became degenerate.
    DeadEnd,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::EtaHit => "eta_hit",
            StopReason::LMaxHit => "l_max_hit",
            StopReason::L1Hit => "l1_hit",
            StopReason::DeadEnd => "dead_end",
        };
        f.write_str(s)
    }
}

/// Stopping criterion for the decimation loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Stop once `‖y′‖₂ ≤ eta` or after `l_max` steps.
    EtaL2 { eta: f64, l_max: usize },
    /// Naive rule: stop once `(1/n)‖y′‖₁ < tol`; hard-capped at `min(n, p)`
    /// steps so that finite precision cannot keep the loop alive forever.
    NaiveL1 { tol: f64 },
    /// Run for exactly `l_max` steps (or until the residual is exhausted).
    StepBudgetOnly { l_max: usize },
}

/// Default per-sample `ℓ₁` tolerance of the naive rule.
pub const DEFAULT_L1_TOL: f64 = 1e-5;

/// Default step budget `⌊n / ln n⌋`, at least 1.
pub fn l_max_default(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(AssdError::InvalidInput(format!(
            "l_max_default requires n >= 2, got {n}"
        )));
    }
    let nf = n as f64;
    Ok(((nf / nf.ln()).floor() as usize).max(1))
}

/// One row of the per-step residual trace.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StepRecord {
    /// 1-based decimation step.
    pub step: usize,
    /// Original column index selected at this step.
    pub index: usize,
    /// `(1/n)‖y′‖₁` after the step.
    pub l1_over_n: f64,
    /// `‖y′‖₂` after the step.
    pub l2: f64,
}

/// Mutable state of one decimation run.
#[derive(Debug, Clone)]
pub struct DecimationState {
    xp: DMatrix<f64>,
    yp: DVector<f64>,
    gram: DMatrix<f64>,
    active: Vec<bool>,
    n_active: usize,
    selected: Vec<usize>,
    dropped: Vec<usize>,
    pivot_floor: f64,
    rank_tol: f64,
}

impl DecimationState {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>, rank_tol: f64) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(AssdError::DimensionMismatch(format!(
                "y has length {} but X has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        check_finite_matrix(x, "X")?;
        check_finite_vector(y, "y")?;

        let p = x.ncols();
        let max_col_norm = (0..p).map(|i| x.column(i).norm()).fold(0.0, f64::max);
        let pivot_floor = DEFAULT_PIVOT_FLOOR_REL * max_col_norm;

        let mut active = vec![true; p];
        let mut dropped = Vec::new();
        for i in 0..p {
            if x.column(i).norm() <= pivot_floor {
                active[i] = false;
                dropped.push(i);
            }
        }
        let n_active = p - dropped.len();

        Ok(Self {
            gram: row_gram(x),
            xp: x.clone(),
            yp: y.clone(),
            active,
            n_active,
            selected: Vec::new(),
            dropped,
            pivot_floor,
            rank_tol,
        })
    }

    pub fn residual(&self) -> &DVector<f64> {
        &self.yp
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Decimation step count `L`.
    pub fn step_count(&self) -> usize {
        self.selected.len()
    }

    pub fn active_count(&self) -> usize {
        self.n_active
    }

    /// Columns dropped as degenerate (duplicates driven to zero by deflation).
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// Current deflated column `i`.
    pub fn column(&self, i: usize) -> DVector<f64> {
        self.xp.column(i).into_owned()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    /// Guidance values over the active columns of the current deflated system.
    pub fn guidance(&self) -> Vec<(usize, f64)> {
        let z = gram_solve(&self.gram, &self.yp, self.rank_tol);
        (0..self.xp.ncols())
            .filter(|&i| self.active[i])
            .map(|i| (i, self.xp.column(i).dot(&z)))
            .collect()
    }

    /// One decimation step: rank, select, deflate.
    pub fn step(&mut self) -> Result<StepRecord> {
        if self.n_active == 0 {
            return Err(AssdError::DeadEnd);
        }

        // Leading guidance index; strict comparison keeps the lowest index on
        // ties.
        let z = gram_solve(&self.gram, &self.yp, self.rank_tol);
        let p = self.xp.ncols();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..p {
            if !self.active[i] {
                continue;
            }
            let g = self.xp.column(i).dot(&z).abs();
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((i, g));
            }
        }
        let (k, _) = best.ok_or(AssdError::DeadEnd)?;

        let pivot = self.xp.column(k).into_owned();
        let nk2 = pivot.norm_squared();
        self.active[k] = false;
        self.n_active -= 1;
        self.selected.push(k);

        // Deflate the residual and every remaining active column.
        self.yp.axpy(-self.yp.dot(&pivot) / nk2, &pivot, 1.0);
        for i in 0..p {
            if !self.active[i] {
                continue;
            }
            let c = self.xp.column(i).dot(&pivot) / nk2;
            let mut col = self.xp.column_mut(i);
            col.axpy(-c, &pivot, 1.0);
            if col.norm() <= self.pivot_floor {
                self.active[i] = false;
                self.n_active -= 1;
                self.dropped.push(i);
            }
        }

        // Gram congruence G ← P G P with P = I − v vᵀ / (vᵀ v):
        // G − u wᵀ − w uᵀ + (vᵀw) u uᵀ, where u = v / (vᵀv), w = G v.
        let u = &pivot / nk2;
        let w = &self.gram * &pivot;
        let vw = pivot.dot(&w);
        self.gram.ger(-1.0, &u, &w, 1.0);
        self.gram.ger(-1.0, &w, &u, 1.0);
        self.gram.ger(vw, &u, &u, 1.0);

        let n = self.yp.len() as f64;
        Ok(StepRecord {
            step: self.selected.len(),
            index: k,
            l1_over_n: self.yp.iter().map(|v| v.abs()).sum::<f64>() / n,
            l2: self.yp.norm(),
        })
    }
}

/// Outcome of a full decimation loop.
#[derive(Debug, Clone)]
pub struct DecimationRun {
    /// Selected original column indices, in selection order.
    pub selected: Vec<usize>,
    pub trace: Vec<StepRecord>,
    pub stop_reason: StopReason,
    /// Number of columns dropped as degenerate during the run.
    pub dropped: usize,
}

/// Run decimation until `rule` fires.
pub fn run_decimation(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    rule: &StoppingRule,
    rank_tol: f64,
) -> Result<DecimationRun> {
    let mut state = DecimationState::new(x, y, rank_tol)?;
    let n = x.nrows();
    let p = x.ncols();
    let nf = n as f64;
    let mut trace = Vec::new();

    let stop_reason = loop {
        let l = state.step_count();
        let l2 = state.yp.norm();
        match *rule {
            StoppingRule::EtaL2 { eta, l_max } => {
                if l2 <= eta {
                    break StopReason::EtaHit;
                }
                if l >= l_max {
                    break StopReason::LMaxHit;
                }
            }
            StoppingRule::NaiveL1 { tol } => {
                let l1n = state.yp.iter().map(|v| v.abs()).sum::<f64>() / nf;
                if l1n < tol {
                    break StopReason::L1Hit;
                }
                if l >= n.min(p) {
                    break StopReason::LMaxHit;
                }
            }
            StoppingRule::StepBudgetOnly { l_max } => {
                if l >= l_max {
                    break StopReason::LMaxHit;
                }
                if l2 == 0.0 {
                    break StopReason::EtaHit;
                }
            }
        }
        match state.step() {
            Ok(rec) => trace.push(rec),
            Err(AssdError::DeadEnd) => break StopReason::DeadEnd,
            Err(e) => return Err(e),
        }
    };

    Ok(DecimationRun {
        selected: state.selected.clone(),
        trace,
        stop_reason,
        dropped: state.dropped.len(),
    })
}

/// Result of stage 1: decimation followed by a refit on the original columns.
#[derive(Debug, Clone)]
pub struct Stage1Result {
    /// Dense coefficient vector, nonzero exactly on the selected support.
    pub beta: DVector<f64>,
    pub run: DecimationRun,
}

/// Decimation plus backtracking refit on the original `X` and `y`.
pub fn stage1_solve(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    rule: &StoppingRule,
    rank_tol: f64,
) -> Result<Stage1Result> {
    let run = run_decimation(x, y, rule, rank_tol)?;
    let coeffs = refit_on_support(x, y, &run.selected, rank_tol)?;
    let mut beta = DVector::zeros(x.ncols());
    for (j, &i) in run.selected.iter().enumerate() {
        beta[i] = coeffs[j];
    }
    Ok(Stage1Result { beta, run })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DEFAULT_RANK_TOL;
    use nalgebra::DVector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn l_max_default_values() {
        assert_eq!(l_max_default(200).unwrap(), 37);
        assert_eq!(l_max_default(300).unwrap(), 52);
        assert_eq!(l_max_default(3).unwrap(), 2);
        assert!(l_max_default(1).is_err());
    }

    #[test]
    fn identity_step_selects_larger_response_entry() {
        let x = DMatrix::identity(2, 2);
        let y = DVector::from_column_slice(&[0.0, 5.0]);
        let mut st = DecimationState::new(&x, &y, DEFAULT_RANK_TOL).unwrap();
        let rec = st.step().unwrap();
        assert_eq!(rec.index, 1);
        assert!(st.residual().norm() < 1e-12);
    }

    #[test]
    fn single_column_truth_recovered_in_one_step() {
        let x = gaussian_matrix(5, 8, 9);
        let y = x.column(3) * 2.0;
        let mut st = DecimationState::new(&x, &y, DEFAULT_RANK_TOL).unwrap();
        let rec = st.step().unwrap();
        assert_eq!(rec.index, 3);
        assert!(rec.l2 < 1e-10);
    }

    #[test]
    fn noiseless_two_column_truth_recovered() {
        let x = gaussian_matrix(6, 10, 17);
        let mut beta0 = DVector::zeros(10);
        beta0[2] = 1.0;
        beta0[8] = -0.8;
        let y = &x * &beta0;
        let rule = StoppingRule::EtaL2 {
            eta: 1e-9,
            l_max: 6,
        };
        let res = stage1_solve(&x, &y, &rule, DEFAULT_RANK_TOL).unwrap();
        let mut sel = res.run.selected.clone();
        sel.sort_unstable();
        assert_eq!(sel, vec![2, 8]);
        assert!((res.beta - beta0).norm() < 1e-8);
    }

    #[test]
    fn zero_response_selects_nothing() {
        let x = gaussian_matrix(4, 6, 1);
        let y = DVector::zeros(4);
        let run = run_decimation(
            &x,
            &y,
            &StoppingRule::EtaL2 {
                eta: 0.1,
                l_max: 4,
            },
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        assert!(run.selected.is_empty());
        assert_eq!(run.stop_reason, StopReason::EtaHit);
    }

    #[test]
    fn residual_l2_monotone_and_deflation_orthogonal() {
        let x = gaussian_matrix(8, 20, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let y = DVector::from_fn(8, |_, _| rng.sample(StandardNormal));
        let mut st = DecimationState::new(&x, &y, DEFAULT_RANK_TOL).unwrap();
        let mut prev = st.residual().norm();
        for _ in 0..6 {
            let before = st.clone();
            let rec = st.step().unwrap();
            assert!(rec.l2 <= prev + 1e-12);
            prev = rec.l2;
            // post-step columns and residual orthogonal to the pre-step pivot
            let pivot = before.column(rec.index);
            let scale = pivot.norm();
            for i in 0..20 {
                if st.is_active(i) {
                    let col = st.column(i);
                    assert!(col.dot(&pivot).abs() <= 1e-8 * scale * col.norm().max(1e-300));
                }
            }
            assert!(st.residual().dot(&pivot).abs() <= 1e-8 * scale * st.residual().norm().max(1e-300));
        }
    }

    #[test]
    fn duplicate_columns_dropped_not_fatal() {
        let mut x = gaussian_matrix(6, 8, 31);
        let dup = x.column(0).into_owned();
        x.set_column(5, &dup);
        let y = x.column(0) * 1.5;
        let run = run_decimation(
            &x,
            &y,
            &StoppingRule::EtaL2 {
                eta: 1e-9,
                l_max: 6,
            },
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        // selecting column 0 (or 5) deflates its duplicate to zero
        assert_eq!(run.dropped, 1);
        assert_eq!(run.selected.len(), 1);
    }

    #[test]
    fn early_stop_is_prefix_of_naive_run() {
        let x = gaussian_matrix(12, 30, 47);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut beta0 = DVector::zeros(30);
        beta0[4] = 0.9;
        beta0[20] = -0.7;
        let noise = DVector::from_fn(12, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.3);
        let y = &x * &beta0 + noise;

        let naive = run_decimation(
            &x,
            &y,
            &StoppingRule::NaiveL1 { tol: DEFAULT_L1_TOL },
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        let final_l2 = naive.trace.last().map(|r| r.l2).unwrap_or(y.norm());
        let early = run_decimation(
            &x,
            &y,
            &StoppingRule::EtaL2 {
                eta: final_l2.max(1e-12),
                l_max: 12,
            },
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        assert!(early.selected.len() <= naive.selected.len());
        assert_eq!(
            early.selected[..],
            naive.selected[..early.selected.len()]
        );
    }

    #[test]
    fn stage1_matches_best_subset_on_noiseless_tiny_instance() {
        let x = gaussian_matrix(14, 10, 61);
        let mut beta0 = DVector::zeros(10);
        beta0[1] = 1.1;
        beta0[7] = 0.6;
        let y = &x * &beta0;
        let rule = StoppingRule::EtaL2 {
            eta: 1e-9,
            l_max: 6,
        };
        let res = stage1_solve(&x, &y, &rule, DEFAULT_RANK_TOL).unwrap();
        let (support, _) = crate::oracle::best_subset_bruteforce(&x, &y, 2).unwrap();
        let mut sel = res.run.selected.clone();
        sel.sort_unstable();
        assert_eq!(sel, support);
    }
}
