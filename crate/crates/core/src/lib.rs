//! Shortest-solution guided decimation for noisy sparse linear regression.
//!
//! Recovers a sparse coefficient vector from `y = Xβ⁰ + ε` with more
//! predictors than samples. Stage 1 decimates variables one at a time,
//! guided by the minimum-norm least-squares solution, with an early stop
//! calibrated to the noise level. Stage 2 sweeps a threshold over the
//! stage-1 estimate and keeps the BIC-optimal refit.
//!
//! Entry points:
//! - [`solver::solve`] runs one of the three algorithm variants on `(X, y)`.
//! - [`harness::run_experiment`] runs a config-driven Monte-Carlo study.
//! - [`datagen`] generates seeded synthetic instances.

pub mod datagen;
pub mod decimate;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod plot;
pub mod seed;
pub mod solver;
pub mod threshold;

pub use datagen::{gen_instance, CoeffLaw, CoeffSpec, MatrixFamily, MatrixSpec, ProblemInstance};
pub use decimate::{l_max_default, run_decimation, StopReason, StoppingRule};
pub use error::{AssdError, Result};
pub use harness::{run_experiment, ExperimentConfig, ResultTable};
pub use linalg::{min_norm_least_squares, GuidanceVector};
pub use metrics::{relative_error, support_counts, TrialRecord};
pub use solver::{solve, Algorithm, SolveResult, SolverConfig};
pub use threshold::{threshold_sweep, SweepResult, ThresholdConfig};
