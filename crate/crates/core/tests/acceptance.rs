//! End-to-end acceptance checks. Each test prints one PASS/FAIL line so the
//! whole gate can be read off the test output.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use assd_core::datagen::{gen_instance, CoeffLaw, CoeffSpec, MatrixFamily, MatrixSpec};
use assd_core::decimate::{run_decimation, StoppingRule, DEFAULT_L1_TOL};
use assd_core::linalg::{min_norm_least_squares, refit_on_support, GuidanceVector};
use assd_core::metrics::{q_curve, relative_error, support_counts, TrialRecord};
use assd_core::oracle;
use assd_core::solver::{solve, Algorithm, SolverConfig};
use assd_core::threshold::{
    bic_score, threshold_sweep, threshold_sweep_full_grid, ThresholdConfig,
};

const RANK_TOL: f64 = 1e-12;

fn report(id: u32, what: &str, pass: bool) {
    println!(
        "ACCEPTANCE {id:2}: {} - {what}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance {id} failed: {what}");
}

fn iid_spec(n: usize, p: usize) -> MatrixSpec {
    MatrixSpec {
        family: MatrixFamily::IidGaussian,
        n,
        p,
        standardize: false,
    }
}

fn uniform_pos(s0: usize) -> CoeffSpec {
    CoeffSpec {
        s0,
        law: CoeffLaw::UniformPos { lo: 0.5, hi: 1.0 },
    }
}

/// Refit on the decimation support, scattered into a dense vector.
fn refit_dense(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    support: &[usize],
) -> DVector<f64> {
    let coefs = refit_on_support(x, y, support, RANK_TOL).unwrap();
    let mut beta = DVector::zeros(x.ncols());
    for (k, &i) in support.iter().enumerate() {
        beta[i] = coefs[k];
    }
    beta
}

#[test]
fn criterion_01_noiseless_exact_recovery() {
    let mspec = iid_spec(200, 1000);
    let cspec = uniform_pos(30);
    let mut stopped_at_30 = 0;
    let mut max_inf_err: f64 = 0.0;
    let mut max_secs: f64 = 0.0;
    for seed in 0..20u64 {
        let inst = gen_instance(&mspec, &cspec, 0.0, seed).unwrap();
        let t0 = Instant::now();
        let run = run_decimation(
            &inst.x,
            &inst.y,
            &StoppingRule::NaiveL1 {
                tol: DEFAULT_L1_TOL,
            },
            RANK_TOL,
        )
        .unwrap();
        max_secs = max_secs.max(t0.elapsed().as_secs_f64());
        if run.selected.len() == 30 {
            stopped_at_30 += 1;
            let beta = refit_dense(&inst.x, &inst.y, &run.selected);
            let beta0 = inst.beta0.unwrap();
            let inf_err = (&beta - &beta0).amax();
            max_inf_err = max_inf_err.max(inf_err);
        }
    }
    let pass = stopped_at_30 >= 18 && max_inf_err <= 1e-6 && max_secs <= 5.0;
    println!(
        "  noiseless: L=30 in {stopped_at_30}/20 runs, max inf-err {max_inf_err:.2e}, max {max_secs:.2}s/run"
    );
    report(
        1,
        "noiseless decimation stops at L = 30 with exact recovery",
        pass,
    );
}

#[test]
fn criterion_02_naive_rule_fails_under_noise() {
    let mspec = iid_spec(200, 1000);
    let cspec = uniform_pos(30);
    let mut long_runs = 0;
    let mut min_fp = usize::MAX;
    for seed in 0..20u64 {
        let inst = gen_instance(&mspec, &cspec, 1.0, seed).unwrap();
        let run = run_decimation(
            &inst.x,
            &inst.y,
            &StoppingRule::NaiveL1 {
                tol: DEFAULT_L1_TOL,
            },
            RANK_TOL,
        )
        .unwrap();
        if run.selected.len() > 90 {
            long_runs += 1;
        }
        let beta = refit_dense(&inst.x, &inst.y, &run.selected);
        let (_, fp) = support_counts(&beta, inst.beta0.as_ref().unwrap(), 0.0).unwrap();
        min_fp = min_fp.min(fp);
    }
    let pass = long_runs >= 18 && min_fp > 50;
    println!("  noisy naive rule: L > 90 in {long_runs}/20 runs, min FP {min_fp}");
    report(2, "naive stopping overselects badly under noise", pass);
}

#[test]
fn criterion_03_thresholding_removes_false_positives() {
    let mspec = iid_spec(200, 1000);
    let cspec = CoeffSpec {
        s0: 30,
        law: CoeffLaw::SignedUniform { lo: 0.5, hi: 1.0 },
    };
    let base = SolverConfig {
        eta: Some(0.1),
        ..SolverConfig::default()
    };
    let (mut fp_assd, mut tp_assd, mut fp_ssd1) = (0usize, 0usize, 0usize);
    for seed in 0..20u64 {
        let inst = gen_instance(&mspec, &cspec, 1.0, seed).unwrap();
        let beta0 = inst.beta0.as_ref().unwrap();
        let assd = solve(
            &inst.x,
            &inst.y,
            &SolverConfig {
                algorithm: Algorithm::Assd,
                ..base
            },
        )
        .unwrap();
        let ssd1 = solve(
            &inst.x,
            &inst.y,
            &SolverConfig {
                algorithm: Algorithm::Ssd1,
                ..base
            },
        )
        .unwrap();
        let (tp, fp) = support_counts(&assd.beta, beta0, 0.0).unwrap();
        tp_assd += tp;
        fp_assd += fp;
        let (_, fp) = support_counts(&ssd1.beta, beta0, 0.0).unwrap();
        fp_ssd1 += fp;
    }
    let (mean_fp_assd, mean_tp_assd, mean_fp_ssd1) = (
        fp_assd as f64 / 20.0,
        tp_assd as f64 / 20.0,
        fp_ssd1 as f64 / 20.0,
    );
    let pass = mean_fp_assd <= 1.0 && mean_tp_assd >= 29.0 && mean_fp_ssd1 >= 3.0;
    println!(
        "  thresholding: ASSD FP {mean_fp_assd:.2}, ASSD TP {mean_tp_assd:.2}, SSD1 FP {mean_fp_ssd1:.2}"
    );
    report(3, "second-stage thresholding eliminates false positives", pass);
}

struct BatchStats {
    tp: f64,
    fp: f64,
    re: f64,
    max_secs: f64,
}

fn run_batch(mspec: &MatrixSpec, cspec: &CoeffSpec, repeats: u64) -> BatchStats {
    let cfg = SolverConfig {
        sigma: Some(1.0),
        ..SolverConfig::default()
    };
    let records: Vec<TrialRecord> = (0..repeats)
        .map(|seed| {
            let inst = gen_instance(mspec, cspec, 1.0, seed).unwrap();
            let beta0 = inst.beta0.as_ref().unwrap();
            let res = solve(&inst.x, &inst.y, &cfg).unwrap();
            let (tp, fp) = support_counts(&res.beta, beta0, 0.0).unwrap();
            TrialRecord {
                seed,
                re: relative_error(&res.beta, beta0).unwrap(),
                tp,
                fp,
                exact_recovery: false,
                wall_time: res.wall_time,
                l_stage1: res.l_stage1,
                stop_reason: res.stop_reason,
            }
        })
        .collect();
    let n = repeats as f64;
    BatchStats {
        tp: records.iter().map(|r| r.tp as f64).sum::<f64>() / n,
        fp: records.iter().map(|r| r.fp as f64).sum::<f64>() / n,
        re: records.iter().map(|r| r.re).sum::<f64>() / n,
        max_secs: records.iter().map(|r| r.wall_time).fold(0.0, f64::max),
    }
}

#[test]
fn criterion_04_gaussian_uncorrelated_batch() {
    let stats = run_batch(&iid_spec(300, 2000), &uniform_pos(40), 96);
    let pass = (39.0..=40.0).contains(&stats.tp)
        && stats.fp <= 2.0
        && (0.05..=0.15).contains(&stats.re)
        && stats.max_secs <= 60.0;
    println!(
        "  iid batch: TP {:.2}, FP {:.2}, RE {:.3}, max {:.1}s/repeat",
        stats.tp, stats.fp, stats.re, stats.max_secs
    );
    report(4, "uncorrelated Gaussian batch statistics", pass);
}

#[test]
fn criterion_05_gaussian_correlated_batch() {
    let mspec = MatrixSpec {
        family: MatrixFamily::Ar1Gaussian { pi: 0.7 },
        n: 300,
        p: 2000,
        standardize: false,
    };
    let stats = run_batch(&mspec, &uniform_pos(40), 96);
    let pass = stats.tp >= 38.0 && stats.fp <= 3.0 && (0.07..=0.25).contains(&stats.re);
    println!(
        "  correlated batch: TP {:.2}, FP {:.2}, RE {:.3}",
        stats.tp, stats.fp, stats.re
    );
    report(5, "correlated Gaussian batch statistics", pass);
}

#[test]
fn criterion_06_structured_batch() {
    let mspec = MatrixSpec {
        family: MatrixFamily::Structured { r: 305 },
        n: 300,
        p: 2000,
        standardize: false,
    };
    let stats = run_batch(&mspec, &uniform_pos(40), 96);
    let pass = stats.tp == 40.0 && stats.fp <= 0.5 && (0.002..=0.01).contains(&stats.re);
    println!(
        "  structured batch: TP {:.2}, FP {:.2}, RE {:.4}",
        stats.tp, stats.fp, stats.re
    );
    report(6, "structured near-square batch statistics", pass);
}

#[test]
fn criterion_07_guidance_ranking_quality() {
    let mspec = iid_spec(200, 1000);
    let cspec = uniform_pos(20);
    let mut q10_sum = 0.0;
    let mut dominated = 0;
    for seed in 0..96u64 {
        let noisy = gen_instance(&mspec, &cspec, 1.0, seed).unwrap();
        let clean = gen_instance(&mspec, &cspec, 0.0, seed).unwrap();
        let beta0 = noisy.beta0.as_ref().unwrap();
        let q_of = |x: &DMatrix<f64>, y: &DVector<f64>| {
            let gamma = min_norm_least_squares(x, y, RANK_TOL).unwrap();
            q_curve(&GuidanceVector::from_dense(&gamma), beta0)
        };
        let qn = q_of(&noisy.x, &noisy.y);
        let qc = q_of(&clean.x, &clean.y);
        q10_sum += qn[9].1;
        if qc[19].1 >= qn[19].1 {
            dominated += 1;
        }
    }
    let q10 = q10_sum / 96.0;
    let pass = q10 >= 0.9 && dominated >= 77; // 80% of 96
    println!("  guidance: mean q(10) = {q10:.3}, clean >= noisy at r = s0 in {dominated}/96 pairs");
    report(7, "guidance vector ranks true support highly", pass);
}

#[test]
fn criterion_08_min_norm_matches_svd_oracle() {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    let mut worst_gamma = 0.0f64;
    let mut worst_mp = 0.0f64;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=64);
        let p = rng.random_range(2..=64);
        let mut x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        if seed % 5 == 0 && p >= 2 {
            // inject rank deficiency
            let dup = x.column(0).into_owned();
            x.set_column(p - 1, &dup);
        }
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));

        let gamma_fast = min_norm_least_squares(&x, &y, RANK_TOL).unwrap();
        let pinv = oracle::pinv_via_svd(&x, RANK_TOL);
        let gamma_svd = &pinv * &y;
        let rel = (&gamma_fast - &gamma_svd).norm() / gamma_svd.norm().max(1e-300);
        worst_gamma = worst_gamma.max(rel);

        let scale = x.norm().max(1.0);
        let mp1 = (&x * &pinv * &x - &x).norm() / scale;
        let mp2 = (&pinv * &x * &pinv - &pinv).norm() / pinv.norm().max(1e-300);
        let xp = &x * &pinv;
        let px = &pinv * &x;
        let mp3 = (&xp - xp.transpose()).norm();
        let mp4 = (&px - px.transpose()).norm();
        worst_mp = worst_mp.max(mp1).max(mp2).max(mp3).max(mp4);
    }
    let pass = worst_gamma <= 1e-8 && worst_mp <= 1e-8;
    println!("  dual route: worst solution gap {worst_gamma:.2e}, worst MP identity gap {worst_mp:.2e}");
    report(8, "fast min-norm solver agrees with the SVD route", pass);
}

#[test]
fn criterion_09_threshold_sweep_equals_oracles() {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    let mut oracle_matches = 0;
    let mut grid_identical = true;
    let total = 50;
    for seed in 0..total as u64 {
        // noiseless tiny instance; the stage-1 estimate carries the exact
        // coefficients plus two planted spurious entries of distinct small
        // magnitudes (so sigma_hat has a well-defined scale)
        let mspec = iid_spec(8, 12);
        let cspec = CoeffSpec {
            s0: 2,
            law: CoeffLaw::UniformPos { lo: 0.5, hi: 1.0 },
        };
        let inst = gen_instance(&mspec, &cspec, 0.0, seed).unwrap();
        let beta0 = inst.beta0.as_ref().unwrap();
        let mut selected: Vec<usize> = (0..12).filter(|&i| beta0[i] != 0.0).collect();
        let mut stage1 = beta0.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let planted = [
            rng.random_range(0.03..0.06),
            rng.random_range(0.12..0.18),
        ];
        for &value in &planted {
            loop {
                let i = rng.random_range(0..12);
                if !selected.contains(&i) {
                    selected.push(i);
                    stage1[i] = value;
                    break;
                }
            }
        }

        let cfg = ThresholdConfig::default();
        let fast = threshold_sweep(&inst.x, &inst.y, &stage1, &selected, &cfg).unwrap();
        let full =
            threshold_sweep_full_grid(&inst.x, &inst.y, &stage1, &selected, &cfg).unwrap();
        if fast.best_beta != full.best_beta
            || fast.best_tau != full.best_tau
            || fast.best_bic != full.best_bic
        {
            grid_identical = false;
        }
        let (_, oracle_bic) =
            oracle::nested_bic_min(&inst.x, &inst.y, &stage1, &selected, RANK_TOL).unwrap();
        if (fast.best_bic - oracle_bic).abs() <= 1e-9 * oracle_bic.abs().max(1.0) {
            oracle_matches += 1;
        }
    }
    let pass = oracle_matches == total && grid_identical;
    println!(
        "  sweep: BIC oracle matched on {oracle_matches}/{total} instances, accelerated == full grid: {grid_identical}"
    );
    report(9, "threshold sweep equals nested-subset BIC minimization", pass);
}

#[test]
fn criterion_10_pipeline_invariants_property_suite() {
    use proptest::prelude::*;

    let mut runner = proptest::test_runner::TestRunner::new(proptest::test_runner::Config {
        cases: 500,
        failure_persistence: None,
        ..Default::default()
    });
    let strategy = (8usize..=16, 2usize..=30, 0usize..=3, 0.1f64..1.0, any::<u64>());
    let result = runner.run(&strategy, |(n, extra, s0, sigma, seed)| {
        let p = n + extra;
        let mspec = iid_spec(n, p);
        let cspec = CoeffSpec {
            s0: s0.min(p / 4),
            law: CoeffLaw::SignedUniform { lo: 0.5, hi: 1.0 },
        };
        let inst = gen_instance(&mspec, &cspec, sigma, seed).unwrap();

        let cfg = |algorithm| SolverConfig {
            algorithm,
            sigma: Some(sigma),
            ..SolverConfig::default()
        };
        let ssd1 = solve(&inst.x, &inst.y, &cfg(Algorithm::Ssd1)).unwrap();
        let assd = solve(&inst.x, &inst.y, &cfg(Algorithm::Assd)).unwrap();

        // residual l2 never increases along the decimation trace
        let mut prev = inst.y.norm();
        for rec in &ssd1.residual_trace {
            prop_assert!(rec.l2 <= prev + 1e-9 * inst.y.norm().max(1.0));
            prev = rec.l2;
        }

        for &i in &assd.support {
            prop_assert!(ssd1.support.contains(&i), "thresholding added index {i}");
        }
        let bic_gap = bic_score(&inst.y, &inst.x, &assd.beta)
            - bic_score(&inst.y, &inst.x, &ssd1.beta);
        prop_assert!(bic_gap <= 1e-9, "thresholding worsened BIC by {bic_gap}");

        let again = solve(&inst.x, &inst.y, &cfg(Algorithm::Assd)).unwrap();
        prop_assert_eq!(&assd.beta, &again.beta);
        prop_assert_eq!(&assd.support, &again.support);
        prop_assert_eq!(assd.stop_reason, again.stop_reason);
        Ok(())
    });
    let pass = result.is_ok();
    if let Err(e) = &result {
        println!("  property failure: {e}");
    }
    report(10, "pipeline invariants hold on 500 random cases", pass);
}
