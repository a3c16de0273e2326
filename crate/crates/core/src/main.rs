//! Command-line harness: path simulation, single-sample estimation, the
//! Monte Carlo MSE table, and kernel/weight diagnostics.
//!
//! Every subcommand accepts `--config <file>` pointing at a flat
//! `key=value` text file whose keys mirror the long flag names; explicit
//! flags override file entries. Exit codes: 0 success, 2 configuration
//! error, 3 numerical failure.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use smatch::baselines::{self, LikelihoodParts};
use smatch::error::{Error, Result};
use smatch::estimator::{fit, BandwidthSelection, FitConfig};
use smatch::harness::{run_experiment, EstimatorKind, ExperimentConfig};
use smatch::kde::{Kernel, WeightFunction};
use smatch::models::{OuModel, ParameterInterval};
use smatch::simulate::{sample_ou_exact, SeedSpec, TimeSeriesSample};

#[derive(Parser)]
#[command(
    name = "smatch",
    version,
    about = "Smooth-and-match drift estimation for discretely observed diffusions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an Ornstein-Uhlenbeck path and emit it as CSV
    Simulate(SimulateArgs),
    /// Estimate the drift parameter from a sample CSV
    Estimate(EstimateArgs),
    /// Run the Monte Carlo grid and emit the MSE table
    McTable(McTableArgs),
    /// Print the kernel moment table and weight-function probes as CSV
    KdeCheck(KdeCheckArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat key=value defaults file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mean-reversion rate
    #[arg(long)]
    theta0: Option<f64>,
    /// Dispersion
    #[arg(long)]
    sigma: Option<f64>,
    /// Observation spacing
    #[arg(long)]
    delta: Option<f64>,
    /// Number of transitions (the path holds n+1 observations)
    #[arg(long)]
    n: Option<usize>,
    /// Base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Replication index of the seed substream
    #[arg(long)]
    rep: Option<u64>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sample CSV with a `# delta=<value>` metadata line
    #[arg(long)]
    input: Option<PathBuf>,
    /// Model family (only `ou` is available)
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Lower end of the parameter interval
    #[arg(long)]
    theta_lo: Option<f64>,
    /// Upper end of the parameter interval
    #[arg(long)]
    theta_hi: Option<f64>,
    /// `auto` for quasi-optimal selection or a fixed value
    #[arg(long)]
    bandwidth: Option<String>,
    /// One of sm|kessler|mle|onestep
    #[arg(long)]
    estimator: Option<String>,
}

#[derive(Args)]
struct McTableArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated observation spacings
    #[arg(long)]
    deltas: Option<String>,
    /// Comma-separated transition counts (each cell holds n+1 observations)
    #[arg(long)]
    ns: Option<String>,
    /// Replications per cell
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of sm,onestep,kessler,mle
    #[arg(long)]
    estimators: Option<String>,
    /// Summary CSV path; the per-replication CSV lands next to it
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-replication CSV path (default: `<out>` with `_raw` suffix)
    #[arg(long)]
    raw_out: Option<PathBuf>,
    #[arg(long)]
    theta_lo: Option<f64>,
    #[arg(long)]
    theta_hi: Option<f64>,
}

#[derive(Args)]
struct KdeCheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flat key=value defaults file. Keys match the long flag names; `#`
/// starts a comment; underscores and dashes are interchangeable.
struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: format!("expected key=value, got {line:?}"),
                })?;
                values.insert(key.trim().replace('_', "-"), value.trim().to_string());
            }
        }
        Ok(ConfigFile { values })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::Config(format!("config key {key}: bad value {raw:?}: {e}"))),
        }
    }
}

fn parse_list<T: FromStr>(name: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| Error::Config(format!("{name}: bad entry {s:?}: {e}")))
        })
        .collect()
}

fn write_out(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, content).map_err(|e| Error::io(path, e)),
        None => {
            print!("{content}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let theta0 = args
        .theta0
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("theta0")?.unwrap_or(2.0)))?;
    let sigma = args
        .sigma
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("sigma")?.unwrap_or(1.0)))?;
    let delta = args
        .delta
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("delta")?.unwrap_or(0.1)))?;
    let n = args
        .n
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("n")?.unwrap_or(199)))?;
    let seed = args
        .seed
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("seed")?.unwrap_or(0)))?;
    let rep = args
        .rep
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("rep")?.unwrap_or(0)))?;
    let out: Option<PathBuf> = match args.out {
        Some(p) => Some(p),
        None => file.get("out")?,
    };

    let model = OuModel::new(theta0, sigma, delta)?;
    let sample = sample_ou_exact(&model, n, SeedSpec::new(seed, rep))?;
    let mut buf = Vec::new();
    sample
        .write_csv(&mut buf)
        .map_err(|e| Error::io(out.clone().unwrap_or_else(|| "<stdout>".into()), e))?;
    write_out(
        out.as_deref(),
        std::str::from_utf8(&buf).expect("csv is utf-8"),
    )
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let input: PathBuf = match args.input {
        Some(p) => p,
        None => file
            .get("input")?
            .ok_or_else(|| Error::Config("estimate needs --input <sample.csv>".into()))?,
    };
    let model = args
        .model
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("model")?.unwrap_or_else(|| "ou".into())))?;
    if model != "ou" {
        return Err(Error::Config(format!(
            "unknown model {model:?}; only `ou` is available"
        )));
    }
    let sigma = args
        .sigma
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("sigma")?.unwrap_or(1.0)))?;
    let theta_lo = args
        .theta_lo
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("theta-lo")?.unwrap_or(0.05)))?;
    let theta_hi = args
        .theta_hi
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("theta-hi")?.unwrap_or(20.0)))?;
    let bandwidth = args
        .bandwidth
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("bandwidth")?.unwrap_or_else(|| "auto".into())))?;
    let estimator = args
        .estimator
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("estimator")?.unwrap_or_else(|| "sm".into())))?;
    let estimator: EstimatorKind = estimator.parse()?;

    let sample = TimeSeriesSample::read_csv_file(&input)?;
    let space = ParameterInterval::new(theta_lo, theta_hi)?;
    let selection = match bandwidth.as_str() {
        "auto" => BandwidthSelection::QuasiOptimal,
        raw => BandwidthSelection::Fixed(raw.parse::<f64>().map_err(|e| {
            Error::Config(format!(
                "bandwidth: expected `auto` or a number, got {raw:?}: {e}"
            ))
        })?),
    };
    let fit_cfg = FitConfig {
        space,
        bandwidth: selection,
        ..FitConfig::default()
    };

    let sm_fit = || {
        fit(
            &sample,
            &smatch::models::DriftSpec::ou(),
            sigma,
            &Kernel::biweight_order4(),
            &WeightFunction::default(),
            &fit_cfg,
        )
    };

    println!("estimator,theta_hat,bandwidth,criterion");
    match estimator {
        EstimatorKind::Sm => {
            let est = sm_fit()?;
            let h = est.bandwidth.expect("fit always selects a bandwidth");
            println!("sm,{},{},{}", est.theta_hat, h, est.criterion_value);
        }
        EstimatorKind::OneStep => {
            let pre = sm_fit()?;
            let step = baselines::one_step(
                pre.theta_hat,
                &sample,
                sigma,
                &LikelihoodParts::ou_exact(),
                space,
            )?;
            let h = pre.bandwidth.expect("fit always selects a bandwidth");
            println!("onestep,{},{},", step.theta_bar, h);
        }
        EstimatorKind::Kessler => {
            let theta = baselines::kessler_estimator(&sample, sigma)?;
            println!("kessler,{theta},,");
        }
        EstimatorKind::Mle => {
            let theta = baselines::ou_mle(&sample, sigma, space)?;
            println!("mle,{theta},,");
        }
    }
    Ok(())
}

fn cmd_mc_table(args: McTableArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let defaults = ExperimentConfig::default();
    let theta0 = args
        .theta0
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("theta0")?.unwrap_or(defaults.theta0)))?;
    let sigma = args
        .sigma
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("sigma")?.unwrap_or(defaults.sigma)))?;
    let deltas_raw = args
        .deltas
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get::<String>("deltas")?.unwrap_or_default()))?;
    let deltas = if deltas_raw.is_empty() {
        defaults.deltas.clone()
    } else {
        parse_list("deltas", &deltas_raw)?
    };
    let ns_raw = args
        .ns
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get::<String>("ns")?.unwrap_or_default()))?;
    let ns = if ns_raw.is_empty() {
        defaults.ns.clone()
    } else {
        parse_list("ns", &ns_raw)?
    };
    let k = args
        .k
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("k")?.unwrap_or(defaults.replications)))?;
    let seed = args
        .seed
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("seed")?.unwrap_or(defaults.base_seed)))?;
    let estimators_raw = args
        .estimators
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get::<String>("estimators")?.unwrap_or_default()))?;
    let estimators = if estimators_raw.is_empty() {
        defaults.estimators.clone()
    } else {
        parse_list("estimators", &estimators_raw)?
    };
    let theta_lo = args
        .theta_lo
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("theta-lo")?.unwrap_or(defaults.theta_space.lo())))?;
    let theta_hi = args
        .theta_hi
        .map(Ok)
        .unwrap_or_else(|| Ok(file.get("theta-hi")?.unwrap_or(defaults.theta_space.hi())))?;
    let out: PathBuf = match args.out {
        Some(p) => p,
        None => file
            .get("out")?
            .unwrap_or_else(|| PathBuf::from("mc-table.csv")),
    };
    let raw_out: PathBuf = match args.raw_out {
        Some(p) => p,
        None => match file.get::<PathBuf>("raw-out")? {
            Some(p) => p,
            None => {
                let stem = out.file_stem().unwrap_or_default().to_string_lossy();
                let ext = out.extension().map(|e| e.to_string_lossy().into_owned());
                let name = match ext {
                    Some(ext) => format!("{stem}_raw.{ext}"),
                    None => format!("{stem}_raw"),
                };
                out.with_file_name(name)
            }
        },
    };

    let cfg = ExperimentConfig {
        theta0,
        sigma,
        deltas,
        ns,
        replications: k,
        base_seed: seed,
        theta_space: ParameterInterval::new(theta_lo, theta_hi)?,
        estimators,
        fit: FitConfig::default(),
    };
    let report = run_experiment(&cfg)?;

    print!("{}", report.format_table());

    let mut summary = Vec::new();
    report
        .write_summary_csv(&mut summary)
        .map_err(|e| Error::io(&out, e))?;
    std::fs::write(&out, &summary).map_err(|e| Error::io(&out, e))?;

    let mut raw = Vec::new();
    report
        .write_raw_csv(&mut raw)
        .map_err(|e| Error::io(&raw_out, e))?;
    std::fs::write(&raw_out, &raw).map_err(|e| Error::io(&raw_out, e))?;

    eprintln!("summary -> {}", out.display());
    eprintln!("raw     -> {}", raw_out.display());
    Ok(())
}

fn cmd_kde_check(args: KdeCheckArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let out: Option<PathBuf> = match args.out {
        Some(p) => Some(p),
        None => file.get("out")?,
    };
    let kernel = Kernel::biweight_order4();
    kernel.validate()?;
    let weight = WeightFunction::default();

    let mut text = String::from("quantity,arg,value\n");
    for l in 0..=6u32 {
        text.push_str(&format!("kernel_moment,{l},{}\n", kernel.moment(l)));
    }
    for u in [0.0, 0.25, 0.5, 0.75, 1.0] {
        text.push_str(&format!("kernel_value,{u},{}\n", kernel.eval(u)));
    }
    for x in [0.0, 0.5, 0.9, 0.98, 1.1, 1.2, 1.3, 1.39, 1.4, 1.5] {
        text.push_str(&format!("weight,{x},{}\n", weight.eval(x)));
        if x > 0.0 {
            text.push_str(&format!("weight,{},{}\n", -x, weight.eval(-x)));
        }
    }
    write_out(out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::McTable(args) => cmd_mc_table(args),
        Command::KdeCheck(args) => cmd_kde_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
