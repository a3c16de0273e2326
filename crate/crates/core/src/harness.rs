//! Monte Carlo experiment runner: simulates replications, runs the
//! configured estimators per (delta, n) cell, aggregates bias, variance
//! and MSE, attaches the efficiency bound, and renders reports.
//!
//! Determinism contract: every replication derives its generator from
//! `(base_seed, cell tag, replication index)`, replications run as a
//! parallel map, and aggregation is a fold over replication index order —
//! never completion order — so reports are byte-identical across reruns
//! and worker counts. Replications failing with degenerate-sample errors
//! are excluded from the aggregates and counted per cell rather than
//! aborting the run.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baselines::{self, LikelihoodParts};
use crate::error::{Error, Result};
use crate::estimator::{fit, FitConfig, SmEstimate};
use crate::kde::{Kernel, WeightFunction};
use crate::models::{DriftSpec, OuModel, ParameterInterval};
use crate::simulate::{mix64, sample_ou_exact, SeedSpec};

/// Estimators the harness can run per replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    /// Smooth-and-match with quasi-optimal bandwidth.
    Sm,
    /// One Newton step on the score from the smooth-and-match preliminary.
    OneStep,
    /// Moment estimator from the stationary second moment.
    Kessler,
    /// Exact maximum likelihood.
    Mle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Sm,
        EstimatorKind::OneStep,
        EstimatorKind::Kessler,
        EstimatorKind::Mle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Sm => "sm",
            EstimatorKind::OneStep => "onestep",
            EstimatorKind::Kessler => "kessler",
            EstimatorKind::Mle => "mle",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sm" => Ok(EstimatorKind::Sm),
            "onestep" => Ok(EstimatorKind::OneStep),
            "kessler" => Ok(EstimatorKind::Kessler),
            "mle" => Ok(EstimatorKind::Mle),
            other => Err(Error::Config(format!(
                "unknown estimator {other:?}; expected sm|onestep|kessler|mle"
            ))),
        }
    }
}

/// Full experiment description. `ns` follows the convention that a cell
/// with index n holds n + 1 observations.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub theta0: f64,
    pub sigma: f64,
    pub deltas: Vec<f64>,
    pub ns: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub theta_space: ParameterInterval,
    pub estimators: Vec<EstimatorKind>,
    pub fit: FitConfig,
}

impl Default for ExperimentConfig {
    /// The benchmark grid: theta0 = 2, sigma = 1,
    /// delta in {0.01, 0.05, 0.1, 1}, n in {99, 199}, 200 replications,
    /// all four estimators.
    fn default() -> Self {
        ExperimentConfig {
            theta0: 2.0,
            sigma: 1.0,
            deltas: vec![0.01, 0.05, 0.1, 1.0],
            ns: vec![99, 199],
            replications: 200,
            base_seed: 7_4120,
            theta_space: ParameterInterval::default(),
            estimators: EstimatorKind::ALL.to_vec(),
            fit: FitConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::Config(format!(
                "need at least 2 replications, got {}",
                self.replications
            )));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
            return Err(Error::Config("deltas must be nonempty and > 0".into()));
        }
        if self.ns.is_empty() || self.ns.iter().any(|&n| n < 10) {
            return Err(Error::Config("ns must be nonempty and >= 10".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators configured".into()));
        }
        if !(self.theta0.is_finite() && self.theta0 > 0.0) {
            return Err(Error::Config(format!(
                "theta0 must be > 0, got {}",
                self.theta0
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    fn wants(&self, kind: EstimatorKind) -> bool {
        self.estimators.contains(&kind)
    }
}

/// One estimator value from one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawEstimate {
    pub rep: usize,
    pub estimator: EstimatorKind,
    pub estimate: f64,
    pub bandwidth: Option<f64>,
}

/// Aggregates of one estimator within a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub mean: f64,
    pub variance: f64,
    pub bias_sq: f64,
    pub mse: f64,
    /// Replications included in the aggregates.
    pub included: usize,
    /// Replications excluded by degenerate-sample failures.
    pub excluded: usize,
}

/// Results of one (delta, n) cell.
#[derive(Debug, Clone)]
pub struct CellReport {
    pub delta: f64,
    pub n: usize,
    pub eb: f64,
    pub summaries: Vec<EstimatorSummary>,
    pub raw: Vec<RawEstimate>,
}

impl CellReport {
    pub fn summary(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == kind)
    }

    /// Included estimates of one estimator in replication order.
    pub fn estimates(&self, kind: EstimatorKind) -> Vec<f64> {
        self.raw
            .iter()
            .filter(|r| r.estimator == kind)
            .map(|r| r.estimate)
            .collect()
    }
}

/// Full report over the experiment grid.
#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub theta0: f64,
    pub sigma: f64,
    pub cells: Vec<CellReport>,
}

impl MonteCarloReport {
    pub fn cell(&self, delta: f64, n: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.delta == delta && c.n == n)
    }

    /// Summary CSV: `delta,n,estimator,mean,variance,bias_sq,mse,eb,k,excluded`.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "delta,n,estimator,mean,variance,bias_sq,mse,eb,k,excluded"
        )?;
        for cell in &self.cells {
            for s in &cell.summaries {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{}",
                    cell.delta,
                    cell.n,
                    s.estimator,
                    s.mean,
                    s.variance,
                    s.bias_sq,
                    s.mse,
                    cell.eb,
                    s.included,
                    s.excluded
                )?;
            }
        }
        Ok(())
    }

    /// Per-replication CSV: `delta,n,rep,estimator,estimate,bandwidth`
    /// (bandwidth empty for estimators that do not smooth).
    pub fn write_raw_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "delta,n,rep,estimator,estimate,bandwidth")?;
        for cell in &self.cells {
            for r in &cell.raw {
                match r.bandwidth {
                    Some(h) => writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        cell.delta, cell.n, r.rep, r.estimator, r.estimate, h
                    )?,
                    None => writeln!(
                        w,
                        "{},{},{},{},{},",
                        cell.delta, cell.n, r.rep, r.estimator, r.estimate
                    )?,
                }
            }
        }
        Ok(())
    }

    /// Fixed-width table mirroring the benchmark layout: one row per
    /// (delta, n) cell, MSE per estimator plus the efficiency bound.
    pub fn format_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>8} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            "delta", "n", "sm", "onestep", "kessler", "mle", "EB"
        ));
        for cell in &self.cells {
            let col = |kind: EstimatorKind| -> String {
                cell.summary(kind)
                    .map(|s| format!("{:.3}", s.mse))
                    .unwrap_or_else(|| "-".into())
            };
            out.push_str(&format!(
                "{:>8} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10.3}\n",
                cell.delta,
                cell.n,
                col(EstimatorKind::Sm),
                col(EstimatorKind::OneStep),
                col(EstimatorKind::Kessler),
                col(EstimatorKind::Mle),
                cell.eb
            ));
        }
        out
    }
}

/// Sample mean, unbiased variance, squared bias against `theta0`, and
/// their sum (the MSE identity holds exactly by construction).
pub fn aggregate(estimates: &[f64], theta0: f64) -> (f64, f64, f64, f64) {
    let k = estimates.len();
    if k == 0 {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = estimates.iter().sum::<f64>() / k as f64;
    let variance = if k > 1 {
        estimates
            .iter()
            .map(|e| (e - mean) * (e - mean))
            .sum::<f64>()
            / (k - 1) as f64
    } else {
        0.0
    };
    let bias_sq = (mean - theta0) * (mean - theta0);
    (mean, variance, bias_sq, variance + bias_sq)
}

/// Sample skewness and excess kurtosis (population moment ratios).
pub fn skewness_excess_kurtosis(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / k;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / k;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

fn cell_tag(delta: f64, n: usize) -> u64 {
    let a = mix64(delta.to_bits());
    mix64(a ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Estimates from one replication, in canonical estimator order; `None`
/// marks a degenerate-sample exclusion.
type RepValue = Option<(f64, Option<f64>)>;

struct RepOutcome {
    values: Vec<(EstimatorKind, RepValue)>,
}

fn run_replication(
    cfg: &ExperimentConfig,
    model: &OuModel,
    n: usize,
    seed: SeedSpec,
) -> Result<RepOutcome> {
    let sample = sample_ou_exact(model, n, seed)?;
    let drift = DriftSpec::ou();
    let kernel = Kernel::biweight_order4();
    let weight = WeightFunction::default();
    let parts = LikelihoodParts::ou_exact();

    let mut fit_cfg = cfg.fit.clone();
    fit_cfg.space = cfg.theta_space;

    // the one-step estimator consumes the smooth-and-match fit as its
    // preliminary, so compute the fit whenever either is configured
    let need_sm = cfg.wants(EstimatorKind::Sm) || cfg.wants(EstimatorKind::OneStep);
    let sm: Option<std::result::Result<SmEstimate, Error>> = if need_sm {
        Some(fit(&sample, &drift, cfg.sigma, &kernel, &weight, &fit_cfg))
    } else {
        None
    };

    let mut values = Vec::new();
    for kind in EstimatorKind::ALL {
        if !cfg.wants(kind) {
            continue;
        }
        let outcome: std::result::Result<(f64, Option<f64>), Error> = match kind {
            EstimatorKind::Sm => sm
                .as_ref()
                .unwrap()
                .as_ref()
                .map(|e| (e.theta_hat, e.bandwidth))
                .map_err(clone_degenerate),
            EstimatorKind::OneStep => match sm.as_ref().unwrap() {
                Ok(pre) => {
                    baselines::one_step(pre.theta_hat, &sample, cfg.sigma, &parts, cfg.theta_space)
                        .map(|r| (r.theta_bar, pre.bandwidth))
                }
                Err(e) => Err(clone_degenerate(e)),
            },
            EstimatorKind::Kessler => {
                baselines::kessler_estimator(&sample, cfg.sigma).map(|t| (t, None))
            }
            EstimatorKind::Mle => {
                baselines::ou_mle(&sample, cfg.sigma, cfg.theta_space).map(|t| (t, None))
            }
        };
        match outcome {
            Ok(v) => values.push((kind, Some(v))),
            Err(Error::DegenerateSample(_)) => values.push((kind, None)),
            Err(e) => return Err(e),
        }
    }
    Ok(RepOutcome { values })
}

fn clone_degenerate(e: &Error) -> Error {
    match e {
        Error::DegenerateSample(what) => Error::DegenerateSample(what),
        other => Error::Config(other.to_string()),
    }
}

/// Run all replications of one (delta, n) cell and aggregate.
pub fn run_cell(cfg: &ExperimentConfig, delta: f64, n: usize) -> Result<CellReport> {
    cfg.validate()?;
    let model = OuModel::new(cfg.theta0, cfg.sigma, delta)?;
    let tag = cell_tag(delta, n);
    let outcomes: Vec<RepOutcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let seed = SeedSpec::new(cfg.base_seed, tag ^ r as u64);
            run_replication(cfg, &model, n, seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut raw = Vec::new();
    for (rep, outcome) in outcomes.iter().enumerate() {
        for &(kind, value) in &outcome.values {
            if let Some((estimate, bandwidth)) = value {
                raw.push(RawEstimate {
                    rep,
                    estimator: kind,
                    estimate,
                    bandwidth,
                });
            }
        }
    }

    let mut summaries = Vec::new();
    for kind in EstimatorKind::ALL {
        if !cfg.wants(kind) {
            continue;
        }
        let estimates: Vec<f64> = raw
            .iter()
            .filter(|r| r.estimator == kind)
            .map(|r| r.estimate)
            .collect();
        let excluded = cfg.replications - estimates.len();
        let (mean, variance, bias_sq, mse) = aggregate(&estimates, cfg.theta0);
        summaries.push(EstimatorSummary {
            estimator: kind,
            mean,
            variance,
            bias_sq,
            mse,
            included: estimates.len(),
            excluded,
        });
    }

    Ok(CellReport {
        delta,
        n,
        eb: baselines::efficiency_bound(cfg.theta0, cfg.sigma, delta, n + 1),
        summaries,
        raw,
    })
}

/// Run the whole experiment grid, cells in (delta, n) configuration order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &delta in &cfg.deltas {
        for &n in &cfg.ns {
            cells.push(run_cell(cfg, delta, n)?);
        }
    }
    Ok(MonteCarloReport {
        theta0: cfg.theta0,
        sigma: cfg.sigma,
        cells,
    })
}

/// Parsed row of the per-replication CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawCsvRow {
    pub delta: f64,
    pub n: usize,
    pub rep: usize,
    pub estimator: EstimatorKind,
    pub estimate: f64,
    pub bandwidth: Option<f64>,
}

/// Parse the raw per-replication CSV written by [`MonteCarloReport::write_raw_csv`].
pub fn parse_raw_csv(text: &str) -> Result<Vec<RawCsvRow>> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == "delta,n,rep,estimator,estimate,bandwidth" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let err = |msg: String| Error::Config(format!("raw csv line {}: {msg}", idx + 1));
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, got {}", fields.len())));
        }
        rows.push(RawCsvRow {
            delta: fields[0].parse().map_err(|e| err(format!("delta: {e}")))?,
            n: fields[1].parse().map_err(|e| err(format!("n: {e}")))?,
            rep: fields[2].parse().map_err(|e| err(format!("rep: {e}")))?,
            estimator: fields[3].parse()?,
            estimate: fields[4]
                .parse()
                .map_err(|e| err(format!("estimate: {e}")))?,
            bandwidth: if fields[5].is_empty() {
                None
            } else {
                Some(
                    fields[5]
                        .parse()
                        .map_err(|e| err(format!("bandwidth: {e}")))?,
                )
            },
        });
    }
    Ok(rows)
}
