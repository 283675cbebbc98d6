//! Evaluation metrics: relative error, support counts, guidance-ranking
//! diagnostics and cross-trial aggregation.

use nalgebra::DVector;

use crate::decimate::StopReason;
use crate::error::{AssdError, Result};
use crate::linalg::GuidanceVector;

/// Per-trial metric row.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    /// Relative estimation error ‖β − β⁰‖₂ / ‖β⁰‖₂.
    pub re: f64,
    pub tp: usize,
    pub fp: usize,
    pub exact_recovery: bool,
    /// Solve wall time in seconds.
    pub wall_time: f64,
    pub l_stage1: usize,
    pub stop_reason: StopReason,
}

/// ‖β − β⁰‖₂ / ‖β⁰‖₂.
pub fn relative_error(beta: &DVector<f64>, beta0: &DVector<f64>) -> Result<f64> {
    if beta.len() != beta0.len() {
        return Err(AssdError::DimensionMismatch(
            "beta and beta0 differ in length".into(),
        ));
    }
    let denom = beta0.norm();
    if denom == 0.0 {
        return Err(AssdError::UndefinedMetric(
            "relative error undefined for beta0 = 0".into(),
        ));
    }
    Ok((beta - beta0).norm() / denom)
}

/// True/false positive counts of variable selection.
///
/// An entry counts as declared nonzero when `|βᵢ| > zero_tol`; the solvers
/// output exact zeros off-support, so the default tolerance is 0.
pub fn support_counts(
    beta: &DVector<f64>,
    beta0: &DVector<f64>,
    zero_tol: f64,
) -> Result<(usize, usize)> {
    if beta.len() != beta0.len() {
        return Err(AssdError::DimensionMismatch(
            "beta and beta0 differ in length".into(),
        ));
    }
    let mut tp = 0;
    let mut fp = 0;
    for (b, b0) in beta.iter().zip(beta0.iter()) {
        if b.abs() > zero_tol {
            if *b0 != 0.0 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    Ok((tp, fp))
}

/// Proportion `q(r)` of true nonzeros among the `r` top-ranked guidance
/// indices, for `r = 1..len`.
pub fn q_curve(guidance: &GuidanceVector, beta0: &DVector<f64>) -> Vec<(usize, f64)> {
    let mut hits = 0usize;
    guidance
        .ranking()
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            if beta0[i] != 0.0 {
                hits += 1;
            }
            (j + 1, hits as f64 / (j + 1) as f64)
        })
        .collect()
}

/// Mean and standard deviation of one metric.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
}

fn summarize(values: impl Iterator<Item = f64> + Clone) -> MetricSummary {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    let sd = if n < 2 {
        0.0
    } else {
        (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    };
    MetricSummary { mean, sd }
}

/// Aggregate over trials: mean/sd per metric (unbiased 1/(N−1) normalization)
/// plus the exact-recovery probability.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Summary {
    pub count: usize,
    pub tp: MetricSummary,
    pub fp: MetricSummary,
    pub re: MetricSummary,
    pub time: MetricSummary,
    pub recovery_prob: f64,
}

pub fn aggregate(records: &[TrialRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(AssdError::InvalidInput("aggregate of zero records".into()));
    }
    let exact = records.iter().filter(|r| r.exact_recovery).count();
    Ok(Summary {
        count: records.len(),
        tp: summarize(records.iter().map(|r| r.tp as f64)),
        fp: summarize(records.iter().map(|r| r.fp as f64)),
        re: summarize(records.iter().map(|r| r.re)),
        time: summarize(records.iter().map(|r| r.wall_time)),
        recovery_prob: exact as f64 / records.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(re: f64, exact: bool) -> TrialRecord {
        TrialRecord {
            seed: 0,
            re,
            tp: 1,
            fp: 0,
            exact_recovery: exact,
            wall_time: 0.0,
            l_stage1: 1,
            stop_reason: StopReason::EtaHit,
        }
    }

    #[test]
    fn relative_error_basics() {
        let b0 = DVector::from_column_slice(&[1.0, -2.0, 0.0]);
        assert_eq!(relative_error(&b0, &b0).unwrap(), 0.0);
        assert_eq!(relative_error(&DVector::zeros(3), &b0).unwrap(), 1.0);
        let twice = &b0 * 2.0;
        assert!((relative_error(&twice, &b0).unwrap() - 1.0).abs() < 1e-15);
        assert!(relative_error(&b0, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn support_counts_basics() {
        let b0 = DVector::from_column_slice(&[1.0, 0.0, -2.0, 0.0]);
        assert_eq!(support_counts(&b0, &b0, 0.0).unwrap(), (2, 0));
        let dense = DVector::from_element(4, 0.5);
        assert_eq!(support_counts(&dense, &b0, 0.0).unwrap(), (2, 2));
        let empty = DVector::zeros(4);
        assert_eq!(support_counts(&empty, &b0, 0.0).unwrap(), (0, 0));
    }

    #[test]
    fn q_curve_dense_truth_is_one() {
        let gv = GuidanceVector::from_dense(&DVector::from_column_slice(&[0.3, -0.9, 0.5]));
        let b0 = DVector::from_element(3, 1.0);
        assert!(q_curve(&gv, &b0).iter().all(|&(_, q)| q == 1.0));
    }

    #[test]
    fn q_curve_perfect_ranking_decays_after_s0() {
        // ranking puts the two true indices first
        let gv = GuidanceVector::from_dense(&DVector::from_column_slice(&[3.0, -2.0, 0.5, 0.1]));
        let b0 = DVector::from_column_slice(&[1.0, 1.0, 0.0, 0.0]);
        let q = q_curve(&gv, &b0);
        assert_eq!(q[0], (1, 1.0));
        assert_eq!(q[1], (2, 1.0));
        assert!((q[2].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((q[3].1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn q_curve_scale_invariant() {
        let gamma = DVector::from_column_slice(&[0.3, -0.9, 0.5, 0.01]);
        let b0 = DVector::from_column_slice(&[0.0, 1.0, 1.0, 0.0]);
        let a = q_curve(&GuidanceVector::from_dense(&gamma), &b0);
        let b = q_curve(&GuidanceVector::from_dense(&(gamma * 17.0)), &b0);
        assert_eq!(a, b);
    }

    #[test]
    fn aggregate_mean_sd() {
        let s = aggregate(&[rec(0.1, true), rec(0.3, true)]).unwrap();
        assert!((s.re.mean - 0.2).abs() < 1e-15);
        assert!((s.re.sd - 0.141_421_356).abs() < 1e-8);
        assert_eq!(s.recovery_prob, 1.0);
    }

    #[test]
    fn aggregate_single_record_sd_zero() {
        let s = aggregate(&[rec(0.5, false)]).unwrap();
        assert_eq!(s.count, 1);
        assert_eq!(s.re.sd, 0.0);
        assert_eq!(s.recovery_prob, 0.0);
    }

    #[test]
    fn aggregate_empty_rejected() {
        assert!(aggregate(&[]).is_err());
    }
}
