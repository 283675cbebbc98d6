//! Facade composing decimation and thresholding into the three named
//! algorithms: SSD (naive stop), SSD1 (early stop), ASSD (early stop plus
//! second-stage thresholding).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::decimate::{
    l_max_default, stage1_solve, StepRecord, StopReason, StoppingRule, DEFAULT_L1_TOL,
};
use crate::error::{AssdError, Result};
use crate::linalg::DEFAULT_RANK_TOL;
use crate::threshold::{threshold_sweep, BicPathEntry, ThresholdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Naive stopping rule, no thresholding.
    Ssd,
    /// Early stopping, no thresholding.
    Ssd1,
    /// Early stopping plus second-stage thresholding.
    Assd,
}

impl std::str::FromStr for Algorithm {
    type Err = AssdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssd" => Ok(Algorithm::Ssd),
            "ssd1" => Ok(Algorithm::Ssd1),
            "assd" => Ok(Algorithm::Assd),
            other => Err(AssdError::Config(format!(
                "unknown algorithm '{other}' (expected ssd, ssd1 or assd)"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Ssd => "ssd",
            Algorithm::Ssd1 => "ssd1",
            Algorithm::Assd => "assd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Early-stopping level; defaults to `√n·σ` when `sigma` is known.
    pub eta: Option<f64>,
    /// Known noise standard deviation.
    pub sigma: Option<f64>,
    /// Override for the `⌊n/ln n⌋` step budget.
    pub l_max_override: Option<usize>,
    /// Threshold sweep upper bound.
    pub r: f64,
    pub tau_step: f64,
    pub rank_tol: f64,
    /// Naive-rule per-sample ℓ₁ tolerance.
    pub l1_tol: f64,
    pub sigma_hat_on_abs: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Assd,
            eta: None,
            sigma: None,
            l_max_override: None,
            r: 20.0,
            tau_step: 0.01,
            rank_tol: DEFAULT_RANK_TOL,
            l1_tol: DEFAULT_L1_TOL,
            sigma_hat_on_abs: false,
        }
    }
}

impl SolverConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    fn resolve_eta(&self, n: usize) -> Result<f64> {
        if let Some(eta) = self.eta {
            return Ok(eta);
        }
        if let Some(sigma) = self.sigma {
            return Ok((n as f64).sqrt() * sigma);
        }
        Err(AssdError::Config(
            "early stopping needs either eta or sigma".into(),
        ))
    }
}

/// Full output of one solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Dense coefficient vector, nonzero exactly on `support`.
    pub beta: DVector<f64>,
    /// Final support in selection order.
    pub support: Vec<usize>,
    /// Stage-1 decimation step count.
    pub l_stage1: usize,
    pub residual_trace: Vec<StepRecord>,
    pub bic_path: Vec<BicPathEntry>,
    pub sigma_hat: f64,
    pub theta0: f64,
    /// Wall-clock solve time in seconds.
    pub wall_time: f64,
    pub stop_reason: StopReason,
}

/// Run the configured algorithm on `(X, y)`.
pub fn solve(x: &DMatrix<f64>, y: &DVector<f64>, config: &SolverConfig) -> Result<SolveResult> {
    let start = Instant::now();
    let n = x.nrows();

    let rule = match config.algorithm {
        Algorithm::Ssd => StoppingRule::NaiveL1 {
            tol: config.l1_tol,
        },
        Algorithm::Ssd1 | Algorithm::Assd => StoppingRule::EtaL2 {
            eta: config.resolve_eta(n)?,
            l_max: match config.l_max_override {
                Some(l) if l >= 1 => l,
                Some(_) => return Err(AssdError::Config("l_max_override must be >= 1".into())),
                None => l_max_default(n)?,
            },
        },
    };

    let stage1 = stage1_solve(x, y, &rule, config.rank_tol)?;

    let (beta, bic_path, sigma_hat, theta0) = if config.algorithm == Algorithm::Assd {
        let sweep = threshold_sweep(
            x,
            y,
            &stage1.beta,
            &stage1.run.selected,
            &ThresholdConfig {
                r: config.r,
                tau_step: config.tau_step,
                sigma_hat_on_abs: config.sigma_hat_on_abs,
                rank_tol: config.rank_tol,
            },
        )?;
        (sweep.best_beta, sweep.path, sweep.sigma_hat, sweep.theta0)
    } else {
        (stage1.beta, Vec::new(), 0.0, 0.0)
    };

    let support: Vec<usize> = stage1
        .run
        .selected
        .iter()
        .copied()
        .filter(|&i| beta[i] != 0.0)
        .collect();

    Ok(SolveResult {
        beta,
        support,
        l_stage1: stage1.run.selected.len(),
        residual_trace: stage1.run.trace,
        bic_path,
        sigma_hat,
        theta0,
        wall_time: start.elapsed().as_secs_f64(),
        stop_reason: stage1.run.stop_reason,
    })
}
