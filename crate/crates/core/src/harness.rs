//! Config-driven Monte-Carlo experiment runner.
//!
//! An experiment is a grid of (sweep value × repeat) trials. Every trial gets
//! a seed derived from the master seed, generates an instance, runs each
//! configured solver and records RE/TP/FP/time. Aggregates land in a summary
//! CSV, raw rows in a per-trial CSV, and run provenance in a JSON metadata
//! file.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

use crate::datagen::{
    gen_instance_with_matrix_seed, CoeffLaw, CoeffSpec, MatrixFamily, MatrixSpec, PRNG_NAME,
};
use crate::error::{AssdError, Result};
use crate::linalg::{min_norm_least_squares, GuidanceVector};
use crate::metrics::{aggregate, q_curve, relative_error, support_counts, Summary, TrialRecord};
use crate::plot::{line_plot, write_svg, Series};
use crate::seed;
use crate::solver::{solve, Algorithm, SolverConfig};
use crate::threshold::BicPathEntry;

/// Which model parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    N,
    P,
    S0,
    Pi,
    R,
}

impl std::str::FromStr for SweepVar {
    type Err = AssdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" => Ok(SweepVar::N),
            "p" => Ok(SweepVar::P),
            "s0" => Ok(SweepVar::S0),
            "pi" => Ok(SweepVar::Pi),
            "r" => Ok(SweepVar::R),
            other => Err(AssdError::Config(format!(
                "unknown sweep variable '{other}' (expected n, p, s0, pi or r)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExperimentConfig {
    pub matrix: MatrixSpec,
    pub coeff: CoeffSpec,
    pub sigma: f64,
    pub solvers: Vec<SolverConfig>,
    pub repeats: usize,
    pub master_seed: u64,
    pub sweep: Option<SweepSpec>,
    /// Share one matrix across the repeats of a sweep value.
    pub fix_matrix: bool,
    pub emit_plots: bool,
    /// Worker count; `None` falls back to `ASSD_JOBS`, then to all cores.
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// Parse a config file: either JSON or flat `key = value` lines
    /// (same schema, `#` comments allowed).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_any(&text)
    }

    pub fn from_str_any(text: &str) -> Result<Self> {
        let map = if text.trim_start().starts_with('{') {
            match serde_json::from_str::<Value>(text)
                .map_err(|e| AssdError::Parse(format!("bad JSON config: {e}")))?
            {
                Value::Object(m) => m,
                _ => return Err(AssdError::Parse("JSON config must be an object".into())),
            }
        } else {
            parse_flat(text)?
        };
        Self::from_map(&map)
    }

    fn from_map(map: &serde_json::Map<String, Value>) -> Result<Self> {
        let get = Getter { map };

        let known = [
            "matrix", "n", "p", "pi", "rank_r", "csv_path", "standardize", "s0", "coeff_law",
            "coeff_lo", "coeff_hi", "tail_value", "sigma", "solvers", "eta", "l_max", "R",
            "tau_step", "rank_tol", "l1_tol", "sigma_hat_on_abs", "repeats", "seed", "jobs",
            "sweep", "sweep_values", "fix_matrix", "emit_plots",
        ];
        for key in map.keys() {
            if !known.contains(&key.as_str()) {
                return Err(AssdError::Config(format!("unknown config key '{key}'")));
            }
        }

        let n = get.usize("n")?.ok_or_else(|| miss("n"))?;
        let p = get.usize("p")?.ok_or_else(|| miss("p"))?;
        let family = match get.str("matrix")?.as_deref().unwrap_or("iid_gaussian") {
            "iid_gaussian" => MatrixFamily::IidGaussian,
            "ar1_gaussian" => MatrixFamily::Ar1Gaussian {
                pi: get.f64("pi")?.ok_or_else(|| miss("pi"))?,
            },
            "structured" => MatrixFamily::Structured {
                r: get.usize("rank_r")?.ok_or_else(|| miss("rank_r"))?,
            },
            "csv_file" => MatrixFamily::CsvFile {
                path: get.str("csv_path")?.ok_or_else(|| miss("csv_path"))?.into(),
            },
            other => {
                return Err(AssdError::Config(format!("unknown matrix family '{other}'")))
            }
        };
        let matrix = MatrixSpec {
            family,
            n,
            p,
            standardize: get.bool("standardize")?.unwrap_or(false),
        };

        let lo = get.f64("coeff_lo")?.unwrap_or(0.5);
        let hi = get.f64("coeff_hi")?.unwrap_or(1.0);
        let law = match get.str("coeff_law")?.as_deref().unwrap_or("uniform_pos") {
            "uniform_pos" => CoeffLaw::UniformPos { lo, hi },
            "signed_uniform" => CoeffLaw::SignedUniform { lo, hi },
            "weak_sparse" => CoeffLaw::WeakSparse {
                lo,
                hi,
                tail: get.f64("tail_value")?.unwrap_or(0.001),
            },
            other => return Err(AssdError::Config(format!("unknown coeff law '{other}'"))),
        };
        let coeff = CoeffSpec {
            s0: get.usize("s0")?.ok_or_else(|| miss("s0"))?,
            law,
        };

        let sigma = get.f64("sigma")?.unwrap_or(0.0);
        let base = SolverConfig {
            eta: get.f64("eta")?,
            sigma: if sigma > 0.0 { Some(sigma) } else { None },
            l_max_override: get.usize("l_max")?,
            r: get.f64("R")?.unwrap_or(20.0),
            tau_step: get.f64("tau_step")?.unwrap_or(0.01),
            rank_tol: get.f64("rank_tol")?.unwrap_or(crate::linalg::DEFAULT_RANK_TOL),
            l1_tol: get.f64("l1_tol")?.unwrap_or(crate::decimate::DEFAULT_L1_TOL),
            sigma_hat_on_abs: get.bool("sigma_hat_on_abs")?.unwrap_or(false),
            ..SolverConfig::default()
        };
        let solver_names = get
            .str_list("solvers")?
            .unwrap_or_else(|| vec!["assd".to_string()]);
        let mut solvers = Vec::new();
        for name in &solver_names {
            let algorithm: Algorithm = name.parse()?;
            solvers.push(SolverConfig { algorithm, ..base });
        }

        let sweep = match get.str("sweep")? {
            Some(var) => {
                let values = get
                    .f64_list("sweep_values")?
                    .ok_or_else(|| miss("sweep_values"))?;
                if values.is_empty() {
                    return Err(AssdError::Config("sweep_values is empty".into()));
                }
                if values.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(AssdError::Config(
                        "sweep_values must be strictly increasing".into(),
                    ));
                }
                Some(SweepSpec {
                    var: var.parse()?,
                    values,
                })
            }
            None => None,
        };

        let repeats = get.usize("repeats")?.unwrap_or(96);
        if repeats == 0 {
            return Err(AssdError::Config("repeats must be >= 1".into()));
        }

        Ok(ExperimentConfig {
            matrix,
            coeff,
            sigma,
            solvers,
            repeats,
            master_seed: get.u64("seed")?.unwrap_or(0),
            sweep,
            fix_matrix: get.bool("fix_matrix")?.unwrap_or(false),
            emit_plots: get.bool("emit_plots")?.unwrap_or(false),
            jobs: get.usize("jobs")?,
        })
    }
}

fn miss(key: &str) -> AssdError {
    AssdError::Config(format!("missing config key '{key}'"))
}

fn parse_flat(text: &str) -> Result<serde_json::Map<String, Value>> {
    let mut map = serde_json::Map::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            AssdError::Parse(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim();
        let parsed = if value.eq_ignore_ascii_case("true") {
            Value::Bool(true)
        } else if value.eq_ignore_ascii_case("false") {
            Value::Bool(false)
        } else if let Ok(n) = value.parse::<f64>() {
            serde_json::Number::from_f64(n)
                .map(Value::Number)
                .unwrap_or_else(|| Value::String(value.to_string()))
        } else {
            Value::String(value.to_string())
        };
        if map.insert(key.clone(), parsed).is_some() {
            return Err(AssdError::Parse(format!(
                "line {}: duplicate key '{key}'",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

struct Getter<'a> {
    map: &'a serde_json::Map<String, Value>,
}

impl Getter<'_> {
    fn str(&self, key: &str) -> Result<Option<String>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Ok(Some(other.to_string())),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => Ok(n.as_f64()),
            Some(Value::String(s)) => s
                .parse()
                .map(Some)
                .map_err(|_| AssdError::Config(format!("key '{key}': expected a number"))),
            Some(_) => Err(AssdError::Config(format!("key '{key}': expected a number"))),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.f64(key)? {
            None => Ok(None),
            Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(Some(v as usize)),
            Some(v) => Err(AssdError::Config(format!(
                "key '{key}': expected a nonnegative integer, got {v}"
            ))),
        }
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => n
                .as_u64()
                .or_else(|| n.as_f64().filter(|v| v.fract() == 0.0 && *v >= 0.0).map(|v| v as u64))
                .map(Some)
                .ok_or_else(|| AssdError::Config(format!("key '{key}': expected a seed"))),
            Some(Value::String(s)) => s
                .parse()
                .map(Some)
                .map_err(|_| AssdError::Config(format!("key '{key}': expected a seed"))),
            Some(_) => Err(AssdError::Config(format!("key '{key}': expected a seed"))),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(_) => Err(AssdError::Config(format!("key '{key}': expected a bool"))),
        }
    }

    fn str_list(&self, key: &str) -> Result<Option<Vec<String>>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Array(a)) => Ok(Some(
                a.iter()
                    .map(|v| match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect(),
            )),
            Some(Value::String(s)) => Ok(Some(
                s.split(',').map(|t| t.trim().to_string()).collect(),
            )),
            Some(_) => Err(AssdError::Config(format!("key '{key}': expected a list"))),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.str_list(key)? {
            None => Ok(None),
            Some(items) => items
                .iter()
                .map(|s| {
                    s.parse().map_err(|_| {
                        AssdError::Config(format!("key '{key}': '{s}' is not a number"))
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }
}

/// One aggregated row of the result table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SummaryRow {
    pub sweep: Option<f64>,
    pub solver: Algorithm,
    pub summary: Summary,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ResultTable {
    pub rows: Vec<SummaryRow>,
    /// Trials that errored, excluded from the aggregates.
    pub failures: usize,
}

#[derive(Debug, Clone)]
struct TrialRow {
    sweep_idx: usize,
    repeat: usize,
    solver: Algorithm,
    record: TrialRecord,
}

fn apply_sweep(
    matrix: &MatrixSpec,
    coeff: &CoeffSpec,
    sweep: Option<(SweepVar, f64)>,
) -> Result<(MatrixSpec, CoeffSpec)> {
    let mut m = matrix.clone();
    let mut c = *coeff;
    if let Some((var, value)) = sweep {
        match var {
            SweepVar::N => m.n = value as usize,
            SweepVar::P => m.p = value as usize,
            SweepVar::S0 => c.s0 = value as usize,
            SweepVar::Pi => match &mut m.family {
                MatrixFamily::Ar1Gaussian { pi } => *pi = value,
                _ => {
                    return Err(AssdError::Config(
                        "sweep over pi requires an ar1_gaussian matrix".into(),
                    ))
                }
            },
            SweepVar::R => match &mut m.family {
                MatrixFamily::Structured { r } => *r = value as usize,
                _ => {
                    return Err(AssdError::Config(
                        "sweep over r requires a structured matrix".into(),
                    ))
                }
            },
        }
    }
    Ok((m, c))
}

fn resolve_jobs(config: &ExperimentConfig) -> usize {
    config
        .jobs
        .or_else(|| {
            std::env::var("ASSD_JOBS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0)
}

/// Run the experiment and write `trials.csv`, `summary.csv`,
/// `metadata.json` (and SVG plots when enabled) into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ResultTable> {
    if config.solvers.is_empty() {
        return Err(AssdError::Config("no solvers configured".into()));
    }
    std::fs::create_dir_all(out_dir)?;

    let sweep_points: Vec<Option<(SweepVar, f64)>> = match &config.sweep {
        Some(s) => s.values.iter().map(|&v| Some((s.var, v))).collect(),
        None => vec![None],
    };
    // validate every sweep point up front; a bad config fails the whole run
    for point in &sweep_points {
        apply_sweep(&config.matrix, &config.coeff, *point)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_jobs(config))
        .build()
        .map_err(|e| AssdError::Config(format!("worker pool: {e}")))?;

    let trials: Vec<(usize, usize)> = (0..sweep_points.len())
        .flat_map(|si| (0..config.repeats).map(move |rep| (si, rep)))
        .collect();

    type TrialOut = (Vec<TrialRow>, Vec<String>);
    let results: Vec<TrialOut> = pool.install(|| {
        trials
            .par_iter()
            .map(|&(si, rep)| {
                let mut rows = Vec::new();
                let mut errors = Vec::new();
                let trial_seed = seed::trial_seed(config.master_seed, si, rep);
                let (mspec, cspec) =
                    apply_sweep(&config.matrix, &config.coeff, sweep_points[si])
                        .expect("validated above");
                let matrix_seed = config
                    .fix_matrix
                    .then(|| seed::mix(seed::mix(config.master_seed, 0xF1F), si as u64));
                let instance = match gen_instance_with_matrix_seed(
                    &mspec,
                    &cspec,
                    config.sigma,
                    trial_seed,
                    matrix_seed,
                ) {
                    Ok(inst) => inst,
                    Err(e) => {
                        errors.push(format!("sweep {si} repeat {rep}: datagen: {e}"));
                        return (rows, errors);
                    }
                };
                let beta0 = instance.beta0.as_ref().expect("generated instances carry beta0");
                for solver_cfg in &config.solvers {
                    match run_trial(&instance.x, &instance.y, beta0, solver_cfg, trial_seed) {
                        Ok(record) => rows.push(TrialRow {
                            sweep_idx: si,
                            repeat: rep,
                            solver: solver_cfg.algorithm,
                            record,
                        }),
                        Err(e) => errors.push(format!(
                            "sweep {si} repeat {rep} solver {}: {e}",
                            solver_cfg.algorithm
                        )),
                    }
                }
                (rows, errors)
            })
            .collect()
    });

    let mut rows: Vec<TrialRow> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for (r, e) in results {
        rows.extend(r);
        failures.extend(e);
    }
    rows.sort_by_key(|r| (r.sweep_idx, r.repeat, r.solver as usize));

    // aggregate per (sweep value, solver)
    let mut table_rows = Vec::new();
    for (si, point) in sweep_points.iter().enumerate() {
        for solver_cfg in &config.solvers {
            let records: Vec<TrialRecord> = rows
                .iter()
                .filter(|r| r.sweep_idx == si && r.solver == solver_cfg.algorithm)
                .map(|r| r.record)
                .collect();
            if records.is_empty() {
                continue;
            }
            table_rows.push(SummaryRow {
                sweep: point.map(|(_, v)| v),
                solver: solver_cfg.algorithm,
                summary: aggregate(&records)?,
            });
        }
    }
    let table = ResultTable {
        rows: table_rows,
        failures: failures.len(),
    };

    write_trials_csv(&out_dir.join("trials.csv"), &rows, &sweep_points)?;
    write_summary_csv(&out_dir.join("summary.csv"), &table)?;
    write_metadata(&out_dir.join("metadata.json"), config, &failures)?;
    if config.emit_plots {
        emit_experiment_plots(config, &table, out_dir)?;
    }
    Ok(table)
}

fn run_trial(
    x: &nalgebra::DMatrix<f64>,
    y: &nalgebra::DVector<f64>,
    beta0: &nalgebra::DVector<f64>,
    solver_cfg: &SolverConfig,
    trial_seed: u64,
) -> Result<TrialRecord> {
    let result = solve(x, y, solver_cfg)?;
    let (tp, fp) = support_counts(&result.beta, beta0, 0.0)?;
    let s0 = beta0.iter().filter(|&&v| v != 0.0).count();
    Ok(TrialRecord {
        seed: trial_seed,
        re: relative_error(&result.beta, beta0)?,
        tp,
        fp,
        exact_recovery: tp == s0 && fp == 0,
        wall_time: result.wall_time,
        l_stage1: result.l_stage1,
        stop_reason: result.stop_reason,
    })
}

fn sweep_label(point: &Option<(SweepVar, f64)>) -> String {
    match point {
        Some((_, v)) => format!("{v}"),
        None => String::new(),
    }
}

fn write_trials_csv(
    path: &Path,
    rows: &[TrialRow],
    sweep_points: &[Option<(SweepVar, f64)>],
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "sweep,solver,seed,tp,fp,re,time,L,stop_reason")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.3},{},{}",
            sweep_label(&sweep_points[r.sweep_idx]),
            r.solver,
            r.record.seed,
            r.record.tp,
            r.record.fp,
            r.record.re,
            r.record.wall_time,
            r.record.l_stage1,
            r.record.stop_reason
        )?;
    }
    Ok(())
}

fn write_summary_csv(path: &Path, table: &ResultTable) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "sweep,solver,tp_mean,tp_sd,fp_mean,fp_sd,re_mean,re_sd,time_mean,time_sd,recovery_prob"
    )?;
    for row in &table.rows {
        let s = &row.summary;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.sweep.map(|v| v.to_string()).unwrap_or_default(),
            row.solver,
            s.tp.mean,
            s.tp.sd,
            s.fp.mean,
            s.fp.sd,
            s.re.mean,
            s.re.sd,
            s.time.mean,
            s.time.sd,
            s.recovery_prob
        )?;
    }
    Ok(())
}

fn write_metadata(path: &Path, config: &ExperimentConfig, failures: &[String]) -> Result<()> {
    let meta = serde_json::json!({
        "build": format!("assd-core {}", env!("CARGO_PKG_VERSION")),
        "prng": PRNG_NAME,
        "config": config,
        "failures": failures,
    });
    std::fs::write(path, serde_json::to_string_pretty(&meta).expect("serializable") + "\n")?;
    Ok(())
}

fn emit_experiment_plots(
    config: &ExperimentConfig,
    table: &ResultTable,
    out_dir: &Path,
) -> Result<()> {
    if config.sweep.is_some() {
        let metric_series = |pick: fn(&Summary) -> f64, label_suffix: &str| -> Vec<Series> {
            config
                .solvers
                .iter()
                .map(|cfg| {
                    let points: Vec<(f64, f64)> = table
                        .rows
                        .iter()
                        .filter(|r| r.solver == cfg.algorithm)
                        .filter_map(|r| r.sweep.map(|v| (v, pick(&r.summary))))
                        .collect();
                    Series::new(format!("{}{label_suffix}", cfg.algorithm), points)
                })
                .collect()
        };
        let svg = line_plot(
            "relative error vs sweep",
            "sweep value",
            "mean RE",
            &metric_series(|s| s.re.mean, ""),
        )?;
        write_svg(&out_dir.join("sweep_re.svg"), &svg)?;

        let mut series = metric_series(|s| s.tp.mean, " TP");
        series.extend(metric_series(|s| s.fp.mean, " FP"));
        let svg = line_plot(
            "selection counts vs sweep",
            "sweep value",
            "mean count",
            &series,
        )?;
        write_svg(&out_dir.join("sweep_tpfp.svg"), &svg)?;
        return Ok(());
    }

    // No sweep: plot the residual trace and the q-curve of the first trial.
    let trial_seed = seed::trial_seed(config.master_seed, 0, 0);
    let matrix_seed = config
        .fix_matrix
        .then(|| seed::mix(seed::mix(config.master_seed, 0xF1F), 0));
    let instance = gen_instance_with_matrix_seed(
        &config.matrix,
        &config.coeff,
        config.sigma,
        trial_seed,
        matrix_seed,
    )?;
    let result = solve(&instance.x, &instance.y, &config.solvers[0])?;
    if !result.residual_trace.is_empty() {
        let pts: Vec<(f64, f64)> = result
            .residual_trace
            .iter()
            .map(|r| (r.step as f64, r.l2))
            .collect();
        let l1: Vec<(f64, f64)> = result
            .residual_trace
            .iter()
            .map(|r| (r.step as f64, r.l1_over_n))
            .collect();
        let svg = line_plot(
            "residual trace",
            "decimation step",
            "residual",
            &[Series::new("l2", pts), Series::new("l1/n", l1)],
        )?;
        write_svg(&out_dir.join("residual_trace.svg"), &svg)?;
    }
    if let Some(beta0) = &instance.beta0 {
        let gamma = min_norm_least_squares(
            &instance.x,
            &instance.y,
            config.solvers[0].rank_tol,
        )?;
        let gv = GuidanceVector::from_dense(&gamma);
        let q: Vec<(f64, f64)> = q_curve(&gv, beta0)
            .into_iter()
            .map(|(r, q)| (r as f64, q))
            .collect();
        let svg = line_plot("guidance quality", "rank r", "q(r)", &[Series::new("q", q)])?;
        write_svg(&out_dir.join("q_curve.svg"), &svg)?;
    }
    Ok(())
}

/// Write a BIC path as CSV (`tau,theta,p_nz,bic`).
pub fn write_bic_path_csv(path: &Path, entries: &[BicPathEntry]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "tau,theta,p_nz,bic")?;
    for e in entries {
        writeln!(out, "{},{},{},{}", e.tau, e.theta, e.p_nz, e.bic)?;
    }
    Ok(())
}

/// Write a residual trace as CSV (`step,index,l1_over_n,l2`).
pub fn write_trace_csv(path: &Path, trace: &[crate::decimate::StepRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "step,index,l1_over_n,l2")?;
    for r in trace {
        writeln!(out, "{},{},{},{}", r.step, r.index, r.l1_over_n, r.l2)?;
    }
    Ok(())
}

/// Reason codes reused by the CLI for exit status mapping.
pub fn is_io_error(e: &AssdError) -> bool {
    matches!(e, AssdError::Io(_))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_json_configs_agree() {
        let flat = "
            matrix = iid_gaussian
            n = 30
            p = 60
            s0 = 3
            sigma = 1.0
            solvers = assd, ssd1
            repeats = 2
            seed = 9
        ";
        let json = r#"{
            "matrix": "iid_gaussian", "n": 30, "p": 60, "s0": 3,
            "sigma": 1.0, "solvers": ["assd", "ssd1"], "repeats": 2, "seed": 9
        }"#;
        let a = ExperimentConfig::from_str_any(flat).unwrap();
        let b = ExperimentConfig::from_str_any(json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.solvers.len(), 2);
        assert_eq!(a.solvers[0].sigma, Some(1.0));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            ExperimentConfig::from_str_any("n = 10\np = 20\ns0 = 1\nbogus = 3"),
            Err(AssdError::Config(_))
        ));
    }

    #[test]
    fn sweep_values_must_increase() {
        let cfg = "
            n = 10
            p = 20
            s0 = 1
            sweep = n
            sweep_values = 30, 20
        ";
        assert!(matches!(
            ExperimentConfig::from_str_any(cfg),
            Err(AssdError::Config(_))
        ));
    }

    #[test]
    fn smoke_experiment_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_str_any(
            "
            matrix = iid_gaussian
            n = 24
            p = 50
            s0 = 2
            sigma = 0.5
            solvers = assd
            repeats = 3
            seed = 4
            emit_plots = true
        ",
        )
        .unwrap();
        let table = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(table.failures, 0);
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].summary.count, 3);
        for f in ["trials.csv", "summary.csv", "metadata.json", "q_curve.svg"] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        let trials = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
        assert!(trials.starts_with("sweep,solver,seed,tp,fp,re,time,L,stop_reason"));
        assert_eq!(trials.lines().count(), 4);
    }

    #[test]
    fn deterministic_trials_modulo_time() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_str_any(
            "n = 20\np = 40\ns0 = 2\nsigma = 0.5\nsolvers = assd\nrepeats = 2\nseed = 11",
        )
        .unwrap();
        run_experiment(&cfg, dir_a.path()).unwrap();
        run_experiment(&cfg, dir_b.path()).unwrap();
        let strip_time = |p: &Path| -> Vec<String> {
            std::fs::read_to_string(p.join("trials.csv"))
                .unwrap()
                .lines()
                .map(|l| {
                    let mut cols: Vec<&str> = l.split(',').collect();
                    cols[6] = "";
                    cols.join(",")
                })
                .collect()
        };
        assert_eq!(strip_time(dir_a.path()), strip_time(dir_b.path()));
    }

    #[test]
    fn fix_matrix_shares_x_across_repeats() {
        let cfg = ExperimentConfig::from_str_any(
            "n = 10\np = 20\ns0 = 1\nsigma = 0.1\nsolvers = assd\nrepeats = 2\nseed = 3\nfix_matrix = true",
        )
        .unwrap();
        let ms = seed::mix(seed::mix(cfg.master_seed, 0xF1F), 0);
        let a = gen_instance_with_matrix_seed(
            &cfg.matrix,
            &cfg.coeff,
            cfg.sigma,
            seed::trial_seed(cfg.master_seed, 0, 0),
            Some(ms),
        )
        .unwrap();
        let b = gen_instance_with_matrix_seed(
            &cfg.matrix,
            &cfg.coeff,
            cfg.sigma,
            seed::trial_seed(cfg.master_seed, 0, 1),
            Some(ms),
        )
        .unwrap();
        assert_eq!(a.x, b.x);
        assert_ne!(a.y, b.y);
    }
}
