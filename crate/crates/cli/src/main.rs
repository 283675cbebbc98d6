//! `assd` command line: solve single instances, run experiments, render
//! plots and generate synthetic data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use assd_core::datagen::{
    gen_instance, load_csv_matrix, load_csv_vector, write_csv_matrix, write_csv_vector, CoeffLaw,
    CoeffSpec, MatrixFamily, MatrixSpec,
};
use assd_core::harness::{self, ExperimentConfig};
use assd_core::plot::{line_plot, write_svg, Series};
use assd_core::solver::{solve, Algorithm, SolverConfig};
use assd_core::AssdError;

#[derive(Parser)]
#[command(name = "assd", version, about = "Sparse regression by guided decimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance given X and y as CSV files.
    Solve {
        /// Measurement matrix, one CSV row per sample.
        x: PathBuf,
        /// Response vector, one value per line.
        y: PathBuf,
        #[arg(long, default_value = "assd")]
        algorithm: String,
        /// Early-stopping level (default √n·σ when --sigma is given).
        #[arg(long)]
        eta: Option<f64>,
        /// Known noise standard deviation.
        #[arg(long)]
        sigma: Option<f64>,
        /// Decimation step budget (default ⌊n/ln n⌋).
        #[arg(long)]
        lmax: Option<usize>,
        /// Threshold sweep upper bound.
        #[arg(long = "R", default_value_t = 20.0)]
        r: f64,
        #[arg(long, default_value_t = 0.01)]
        tau_step: f64,
        /// Where to write the coefficient estimate.
        #[arg(long, default_value = "beta.csv")]
        out: PathBuf,
        /// Optional BIC path CSV (tau,theta,p_nz,bic).
        #[arg(long)]
        bic_path: Option<PathBuf>,
        /// Optional residual trace CSV (step,index,l1_over_n,l2).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a config-driven Monte-Carlo experiment.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for trials.csv, summary.csv, metadata.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker count (default: ASSD_JOBS, then all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Render an SVG plot from a CSV produced by solve/experiment.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
    /// Generate a synthetic instance and write X.csv, y.csv, beta0.csv.
    Gen {
        #[arg(long, default_value = "iid_gaussian")]
        family: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        /// AR(1) column correlation (family ar1_gaussian).
        #[arg(long)]
        pi: Option<f64>,
        /// Factor rank (family structured).
        #[arg(long)]
        rank_r: Option<usize>,
        /// Source matrix (family csv_file).
        #[arg(long)]
        csv_path: Option<PathBuf>,
        #[arg(long)]
        s0: usize,
        #[arg(long, default_value = "uniform_pos")]
        law: String,
        #[arg(long, default_value_t = 0.5)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        /// Off-support value (law weak_sparse).
        #[arg(long, default_value_t = 0.001)]
        tail: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    /// Sorted guidance magnitudes vs rank, from a vector CSV.
    RankCurve,
    /// Precision-at-rank curve, from a two-column (r, q) CSV.
    QCurve,
    /// Residual norms vs step, from a solve --trace CSV.
    ResidualTrace,
    /// Mean RE vs sweep value per solver, from an experiment summary CSV.
    SweepLines,
}

fn exit_for(e: &AssdError) -> ExitCode {
    if harness::is_io_error(e) {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

fn run(cli: Cli) -> assd_core::Result<()> {
    match cli.command {
        Command::Solve {
            x,
            y,
            algorithm,
            eta,
            sigma,
            lmax,
            r,
            tau_step,
            out,
            bic_path,
            trace,
        } => {
            let algorithm: Algorithm = algorithm.parse()?;
            let xm = load_csv_matrix(&x)?;
            let yv = load_csv_vector(&y)?;
            let cfg = SolverConfig {
                eta,
                sigma,
                l_max_override: lmax,
                r,
                tau_step,
                ..SolverConfig::for_algorithm(algorithm)
            };
            let res = solve(&xm, &yv, &cfg)?;
            write_csv_vector(&out, &res.beta)?;
            if let Some(path) = bic_path {
                harness::write_bic_path_csv(&path, &res.bic_path)?;
            }
            if let Some(path) = trace {
                harness::write_trace_csv(&path, &res.residual_trace)?;
            }
            println!(
                "{algorithm}: {} nonzeros, L = {}, stop = {}, time = {:.3}s",
                res.support.len(),
                res.l_stage1,
                res.stop_reason,
                res.wall_time
            );
            Ok(())
        }
        Command::Experiment { config, out, jobs } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if jobs.is_some() {
                cfg.jobs = jobs;
            }
            let table = harness::run_experiment(&cfg, &out)?;
            if table.failures > 0 {
                eprintln!("{} trial(s) failed and were excluded", table.failures);
            }
            println!(
                "{} summary row(s) written to {}",
                table.rows.len(),
                out.display()
            );
            Ok(())
        }
        Command::Plot { kind, input, out } => {
            let svg = render(kind, &input)?;
            write_svg(&out, &svg)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Gen {
            family,
            n,
            p,
            pi,
            rank_r,
            csv_path,
            s0,
            law,
            lo,
            hi,
            tail,
            sigma,
            seed,
            out_dir,
        } => {
            let family = match family.as_str() {
                "iid_gaussian" => MatrixFamily::IidGaussian,
                "ar1_gaussian" => MatrixFamily::Ar1Gaussian {
                    pi: pi.ok_or_else(|| AssdError::Config("--pi required".into()))?,
                },
                "structured" => MatrixFamily::Structured {
                    r: rank_r.ok_or_else(|| AssdError::Config("--rank-r required".into()))?,
                },
                "csv_file" => MatrixFamily::CsvFile {
                    path: csv_path.ok_or_else(|| AssdError::Config("--csv-path required".into()))?,
                },
                other => {
                    return Err(AssdError::Config(format!("unknown family '{other}'")))
                }
            };
            let law = match law.as_str() {
                "uniform_pos" => CoeffLaw::UniformPos { lo, hi },
                "signed_uniform" => CoeffLaw::SignedUniform { lo, hi },
                "weak_sparse" => CoeffLaw::WeakSparse { lo, hi, tail },
                other => return Err(AssdError::Config(format!("unknown law '{other}'"))),
            };
            let inst = gen_instance(
                &MatrixSpec {
                    family,
                    n,
                    p,
                    standardize: false,
                },
                &CoeffSpec { s0, law },
                sigma,
                seed,
            )?;
            std::fs::create_dir_all(&out_dir)?;
            write_csv_matrix(&out_dir.join("X.csv"), &inst.x)?;
            write_csv_vector(&out_dir.join("y.csv"), &inst.y)?;
            if let Some(beta0) = &inst.beta0 {
                write_csv_vector(&out_dir.join("beta0.csv"), beta0)?;
            }
            println!("wrote X.csv, y.csv, beta0.csv to {}", out_dir.display());
            Ok(())
        }
    }
}

fn read_table(path: &std::path::Path) -> assd_core::Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| AssdError::Parse(format!("{}: empty file", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|s| s.trim().to_string()).collect())
        .collect();
    Ok((header, rows))
}

fn col(header: &[String], name: &str) -> assd_core::Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| AssdError::Parse(format!("missing column '{name}'")))
}

fn num(s: &str) -> assd_core::Result<f64> {
    s.parse()
        .map_err(|_| AssdError::Parse(format!("not a number: '{s}'")))
}

fn render(kind: PlotKind, input: &std::path::Path) -> assd_core::Result<String> {
    match kind {
        PlotKind::RankCurve => {
            let v = load_csv_vector(input)?;
            let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            mags.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
            let pts = mags
                .into_iter()
                .enumerate()
                .map(|(i, m)| ((i + 1) as f64, m))
                .collect();
            line_plot(
                "guidance magnitudes",
                "rank",
                "|value|",
                &[Series::new("sorted", pts)],
            )
        }
        PlotKind::QCurve => {
            let (header, rows) = read_table(input)?;
            if header.len() < 2 {
                return Err(AssdError::Parse("expected two columns (r, q)".into()));
            }
            let mut pts = Vec::new();
            // a numeric first header line means there was no header at all
            if let (Ok(a), Ok(b)) = (num(&header[0]), num(&header[1])) {
                pts.push((a, b));
            }
            for row in &rows {
                pts.push((num(&row[0])?, num(&row[1])?));
            }
            line_plot("guidance quality", "rank r", "q(r)", &[Series::new("q", pts)])
        }
        PlotKind::ResidualTrace => {
            let (header, rows) = read_table(input)?;
            let cs = col(&header, "step")?;
            let c2 = col(&header, "l2")?;
            let c1 = col(&header, "l1_over_n")?;
            let mut l2 = Vec::new();
            let mut l1 = Vec::new();
            for row in &rows {
                let step = num(&row[cs])?;
                l2.push((step, num(&row[c2])?));
                l1.push((step, num(&row[c1])?));
            }
            line_plot(
                "residual trace",
                "decimation step",
                "residual",
                &[Series::new("l2", l2), Series::new("l1/n", l1)],
            )
        }
        PlotKind::SweepLines => {
            let (header, rows) = read_table(input)?;
            let csw = col(&header, "sweep")?;
            let cso = col(&header, "solver")?;
            let cre = col(&header, "re_mean")?;
            let mut solvers: Vec<String> = Vec::new();
            for row in &rows {
                if !solvers.contains(&row[cso]) {
                    solvers.push(row[cso].clone());
                }
            }
            let mut series = Vec::new();
            for solver in &solvers {
                let mut pts = Vec::new();
                for row in rows.iter().filter(|r| &r[cso] == solver) {
                    if row[csw].is_empty() {
                        return Err(AssdError::Parse(
                            "summary has no sweep values to plot".into(),
                        ));
                    }
                    pts.push((num(&row[csw])?, num(&row[cre])?));
                }
                series.push(Series::new(solver.clone(), pts));
            }
            line_plot("relative error vs sweep", "sweep value", "mean RE", &series)
        }
    }
}
