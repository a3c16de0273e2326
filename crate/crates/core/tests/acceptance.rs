//! End-to-end acceptance suite. Each test prints one pass/fail line with
//! the measured quantities (visible with `cargo test --test acceptance --
//! --nocapture`).

use std::sync::OnceLock;
use std::time::Instant;

use smatch::baselines::{self, LikelihoodParts};
use smatch::estimator::CriterionContext;
use smatch::harness::{
    run_cell, skewness_excess_kurtosis, CellReport, EstimatorKind, ExperimentConfig,
};
use smatch::kde::{empirical_wise, DensityEstimate, Kernel, WeightFunction};
use smatch::models::{DriftSpec, OuModel, ParameterInterval};
use smatch::quad::UniformGrid;
use smatch::simulate::{sample_ou_exact, SeedSpec};

fn pass(criterion: &str, detail: String) {
    println!("acceptance {criterion}: PASS ({detail})");
}

fn exact_ou_context(theta0: f64, sigma: f64) -> CriterionContext {
    let model = OuModel::new(theta0, sigma, 0.1).unwrap();
    let weight = WeightFunction::default();
    let grid = UniformGrid::new(-1.4, 1.4, 2001).unwrap();
    CriterionContext::from_density_fns(
        move |x| model.stationary_density(x),
        move |x| model.stationary_density_deriv(x),
        DriftSpec::ou(),
        sigma,
        &weight,
        &grid,
    )
    .unwrap()
}

#[test]
fn criterion_01_kernel_moments() {
    let start = Instant::now();
    let kernel = Kernel::biweight_order4();
    let expected = [1.0, 0.0, 0.0, 0.0, -1.0 / 33.0];
    let mut worst = 0.0f64;
    for (l, &want) in expected.iter().enumerate() {
        let got = kernel.moment(l as u32);
        let dev = (got - want).abs();
        worst = worst.max(dev);
        assert!(dev < 1e-9, "moment {l}: {got} vs {want}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(
        "1 kernel moments",
        format!("max deviation {worst:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_02_exact_density_identities() {
    let start = Instant::now();
    let ctx = exact_ou_context(2.0, 1.0);
    let space = ParameterInterval::default();

    let r0 = ctx.criterion(2.0);
    assert!(r0 < 1e-12, "criterion at theta0: {r0}");

    let golden = ctx.minimize(space);
    assert!(
        (golden.theta_hat - 2.0).abs() < 1e-6,
        "minimizer {}",
        golden.theta_hat
    );
    let closed = ctx.ou_closed_form(space).unwrap();
    assert!(
        (closed.theta_hat - 2.0).abs() < 1e-6,
        "closed form {}",
        closed.theta_hat
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(
        "2 exact-density identities",
        format!(
            "R(theta0) = {r0:.2e}, minimizer dev {:.2e}, closed-form dev {:.2e}, {elapsed:?}",
            (golden.theta_hat - 2.0).abs(),
            (closed.theta_hat - 2.0).abs()
        ),
    );
}

#[test]
fn criterion_03_oracle_equivalence() {
    let start = Instant::now();
    let model = OuModel::new(2.0, 1.0, 0.1).unwrap();
    let space = ParameterInterval::default();
    let weight = WeightFunction::default();
    let grid = UniformGrid::new(-1.4, 1.4, 2001).unwrap();
    let mut worst = 0.0f64;
    let mut compared = 0;
    for rep in 0..20u64 {
        let sample = sample_ou_exact(&model, 199, SeedSpec::new(8_2001, rep)).unwrap();
        let h = sample.stddev() * 200f64.powf(-0.125) * 0.9f64.powi(10);
        let density = DensityEstimate::new(&sample, h, Kernel::biweight_order4()).unwrap();
        let ctx = CriterionContext::new(&density, DriftSpec::ou(), 1.0, &weight, &grid).unwrap();
        let closed = ctx.ou_closed_form(space).unwrap();
        if closed.clamped || !space.is_interior(closed.theta_hat) {
            continue;
        }
        let golden = ctx.minimize(space);
        let dev = (closed.theta_hat - golden.theta_hat).abs();
        worst = worst.max(dev);
        compared += 1;
        assert!(
            dev < 1e-4,
            "rep {rep}: closed {} golden {}",
            closed.theta_hat,
            golden.theta_hat
        );
    }
    assert!(compared >= 15, "only {compared} interior closed forms");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(
        "3 oracle equivalence",
        format!("{compared}/20 interior, max |closed - golden| = {worst:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_04_efficiency_bound_reconstruction() {
    let start = Instant::now();
    let cells = [
        (0.01, 100, 4.001),
        (0.01, 200, 2.000),
        (0.05, 100, 0.803),
        (0.05, 200, 0.401),
        (0.1, 100, 0.405),
        (0.1, 200, 0.203),
        (1.0, 100, 0.080),
        (1.0, 200, 0.040),
    ];
    let mut worst = 0.0f64;
    for (delta, np1, want) in cells {
        let got = baselines::efficiency_bound(2.0, 1.0, delta, np1);
        let rel = (got - want).abs() / want;
        worst = worst.max(rel);
        assert!(
            rel < 0.01,
            "delta={delta} n+1={np1}: {got} vs {want} (rel {rel:.2e})"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(
        "4 efficiency bound reconstruction",
        format!("max relative deviation {:.3}%, {elapsed:?}", 100.0 * worst),
    );
}

#[test]
fn criterion_05_table_reproduction_at_benchmark_scale() {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    assert_eq!(cfg.replications, 200);
    assert_eq!(cfg.deltas, vec![0.01, 0.05, 0.1, 1.0]);
    assert_eq!(cfg.ns, vec![99, 199]);
    let report = smatch::harness::run_experiment(&cfg).unwrap();
    assert_eq!(report.cells.len(), 8);

    for cell in &report.cells {
        for s in &cell.summaries {
            assert_eq!(
                s.excluded, 0,
                "cell ({}, {}) estimator {} excluded {} replications",
                cell.delta, cell.n, s.estimator, s.excluded
            );
        }
    }

    let cell = report.cell(1.0, 199).unwrap();
    let mle = cell.summary(EstimatorKind::Mle).unwrap().mse;
    let onestep = cell.summary(EstimatorKind::OneStep).unwrap().mse;
    let kessler = cell.summary(EstimatorKind::Kessler).unwrap().mse;
    assert!((0.025..=0.060).contains(&mle), "MLE MSE {mle}");
    assert!((0.025..=0.060).contains(&onestep), "one-step MSE {onestep}");
    assert!(
        (0.025..=0.065).contains(&kessler),
        "moment-estimator MSE {kessler}"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    pass(
        "5 table reproduction at benchmark scale",
        format!(
            "delta=1 n=199: mle {mle:.3}, onestep {onestep:.3}, kessler {kessler:.3}, grid {elapsed:?}"
        ),
    );
}

fn k500_cfg() -> ExperimentConfig {
    ExperimentConfig {
        replications: 500,
        ..ExperimentConfig::default()
    }
}

fn cell_d1_n199_k500() -> &'static CellReport {
    static CELL: OnceLock<CellReport> = OnceLock::new();
    CELL.get_or_init(|| run_cell(&k500_cfg(), 1.0, 199).unwrap())
}

#[test]
fn criterion_06_qualitative_orderings() {
    let start = Instant::now();
    let small_delta = run_cell(&k500_cfg(), 0.01, 199).unwrap();
    let sm_small = small_delta.summary(EstimatorKind::Sm).unwrap().mse;
    let mle_small = small_delta.summary(EstimatorKind::Mle).unwrap().mse;
    assert!(
        sm_small < mle_small,
        "(a) delta=0.01: sm {sm_small} vs mle {mle_small}"
    );

    let big_delta = cell_d1_n199_k500();
    let sm_big = big_delta.summary(EstimatorKind::Sm).unwrap().mse;
    let mle_big = big_delta.summary(EstimatorKind::Mle).unwrap().mse;
    assert!(
        mle_big < sm_big,
        "(b) delta=1: mle {mle_big} vs sm {sm_big}"
    );

    let onestep_big = big_delta.summary(EstimatorKind::OneStep).unwrap().mse;
    let gap = (onestep_big - mle_big).abs() / mle_big;
    assert!(
        gap <= 0.15,
        "(c) one-step {onestep_big} vs mle {mle_big}: gap {gap:.3}"
    );

    pass(
        "6 qualitative orderings",
        format!(
            "(a) {sm_small:.3} < {mle_small:.3}; (b) {mle_big:.3} < {sm_big:.3}; (c) gap {:.1}%; {:?}",
            100.0 * gap,
            start.elapsed()
        ),
    );
}

#[test]
fn criterion_07_consistency_rate_trend() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        estimators: vec![EstimatorKind::Sm],
        ..ExperimentConfig::default()
    };
    let mse_at = |n: usize| {
        run_cell(&cfg, 0.1, n)
            .unwrap()
            .summary(EstimatorKind::Sm)
            .unwrap()
            .mse
    };
    let m99 = mse_at(99);
    let m199 = mse_at(199);
    let m799 = mse_at(799);
    assert!(m799 < m199 && m199 < m99, "trend {m799} < {m199} < {m99}");
    let ratio = m799 / m199;
    assert!(ratio < 0.6, "rate ratio {ratio}");
    pass(
        "7 consistency/rate trend",
        format!(
            "MSE(sm): n=99 {m99:.3} > n=199 {m199:.3} > n=799 {m799:.3}, ratio {ratio:.2}, {:?}",
            start.elapsed()
        ),
    );
}

#[test]
fn criterion_08_density_wise_trend() {
    let start = Instant::now();
    let theta0 = 2.0;
    let sigma = 1.0;
    let weight = WeightFunction::default();
    let grid = UniformGrid::new(-1.4, 1.4, 2001).unwrap();
    let truth_model = OuModel::new(theta0, sigma, 0.1).unwrap();

    let median_wise = |n: usize| -> f64 {
        let h = (n as f64).powf(-0.125);
        let mut wises: Vec<f64> = (0..50u64)
            .map(|seed| {
                let sample = sample_ou_exact(&truth_model, n, SeedSpec::new(4_0810, seed)).unwrap();
                let density = DensityEstimate::new(&sample, h, Kernel::biweight_order4()).unwrap();
                let (wise_density, _) = empirical_wise(
                    &density,
                    |x| truth_model.stationary_density(x),
                    |x| truth_model.stationary_density_deriv(x),
                    &weight,
                    &grid,
                );
                wise_density
            })
            .collect();
        wises.sort_unstable_by(f64::total_cmp);
        0.5 * (wises[24] + wises[25])
    };

    let w200 = median_wise(200);
    let w800 = median_wise(800);
    let w3200 = median_wise(3200);
    assert!(
        w3200 < w800 && w800 < w200,
        "WISE trend {w3200} < {w800} < {w200}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    pass(
        "8 density WISE trend",
        format!("medians n=200 {w200:.2e} > n=800 {w800:.2e} > n=3200 {w3200:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_09_score_correctness() {
    let start = Instant::now();
    let parts = LikelihoodParts::ou_exact();
    let mut worst_score = 0.0f64;
    let mut worst_deriv = 0.0f64;
    for probe in 0..20u64 {
        let delta = if probe % 2 == 0 { 0.1 } else { 1.0 };
        let model = OuModel::new(2.0, 1.0, delta).unwrap();
        let sample = sample_ou_exact(&model, 120, SeedSpec::new(9_0210, probe)).unwrap();
        // low-discrepancy theta probes over [0.5, 6.5]
        let theta = 0.5 + 6.0 * ((probe as f64) * 0.618_033_988_749_894_8).fract();
        let h = 1e-6 * theta;

        let fd_score = (parts.loglik(theta + h, &sample, 1.0).unwrap()
            - parts.loglik(theta - h, &sample, 1.0).unwrap())
            / (2.0 * h);
        let score = parts.score(theta, &sample, 1.0).unwrap();
        let rel = (fd_score - score).abs() / score.abs().max(1e-2);
        worst_score = worst_score.max(rel);
        assert!(rel < 1e-5, "probe {probe}: score {score} vs fd {fd_score}");

        let fd_deriv = (parts.score(theta + h, &sample, 1.0).unwrap()
            - parts.score(theta - h, &sample, 1.0).unwrap())
            / (2.0 * h);
        let deriv = parts.score_deriv(theta, &sample, 1.0).unwrap();
        let rel = (fd_deriv - deriv).abs() / deriv.abs().max(1e-2);
        worst_deriv = worst_deriv.max(rel);
        assert!(rel < 1e-4, "probe {probe}: score' {deriv} vs fd {fd_deriv}");
    }

    let model = OuModel::new(2.0, 1.0, 1.0).unwrap();
    let sample = sample_ou_exact(&model, 199, SeedSpec::new(9_0211, 0)).unwrap();
    let space = ParameterInterval::default();
    let mle = baselines::ou_mle(&sample, 1.0, space).unwrap();
    let step = baselines::one_step(mle, &sample, 1.0, &parts, space).unwrap();
    let moved = (step.theta_bar - mle).abs();
    assert!(moved < 1e-4, "one step from the MLE moved {moved}");

    pass(
        "9 score correctness",
        format!(
            "max rel dev: score {worst_score:.2e}, score' {worst_deriv:.2e}; step at MLE {moved:.2e}; {:?}",
            start.elapsed()
        ),
    );
}

#[test]
fn criterion_10_cli_determinism_across_workers() {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_smatch");
    let dir = std::env::temp_dir().join("smatch_acceptance_determinism");
    std::fs::create_dir_all(&dir).unwrap();

    let run = |threads: &str, tag: &str| -> (Vec<u8>, Vec<u8>) {
        let out = dir.join(format!("summary_{tag}.csv"));
        let raw = dir.join(format!("raw_{tag}.csv"));
        let status = std::process::Command::new(bin)
            .args([
                "mc-table", "--deltas", "0.1,1", "--ns", "99", "--k", "30", "--seed", "20250809",
                "--out",
            ])
            .arg(&out)
            .arg("--raw-out")
            .arg(&raw)
            .env("RAYON_NUM_THREADS", threads)
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "mc-table failed with {threads} workers");
        (std::fs::read(&out).unwrap(), std::fs::read(&raw).unwrap())
    };

    let (sum1, raw1) = run("1", "w1");
    let (sum4, raw4) = run("4", "w4");
    let (sum1b, raw1b) = run("1", "w1b");
    assert_eq!(sum1, sum4, "summary CSV differs across worker counts");
    assert_eq!(raw1, raw4, "raw CSV differs across worker counts");
    assert_eq!(sum1, sum1b, "summary CSV differs across reruns");
    assert_eq!(raw1, raw1b, "raw CSV differs across reruns");
    std::fs::remove_dir_all(&dir).ok();
    pass(
        "10 determinism",
        format!(
            "summary {} bytes and raw {} bytes identical for 1 vs 4 workers and rerun; {:?}",
            sum1.len(),
            raw1.len(),
            start.elapsed()
        ),
    );
}

/// Distribution-shape screen on the standardized smooth-and-match
/// estimates at delta=1, n=199, k=500: loose Gaussian-shape bounds on
/// skewness and excess kurtosis.
#[test]
fn normality_shape_screen() {
    let cell = cell_d1_n199_k500();
    let estimates = cell.estimates(EstimatorKind::Sm);
    assert_eq!(estimates.len(), 500);
    let (skew, exkurt) = skewness_excess_kurtosis(&estimates);
    assert!(skew.abs() < 0.5, "skewness {skew}");
    assert!(exkurt.abs() < 1.0, "excess kurtosis {exkurt}");
    pass(
        "shape screen",
        format!("skewness {skew:.3}, excess kurtosis {exkurt:.3}"),
    );
}
