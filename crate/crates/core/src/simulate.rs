//! Synthetic observation records.
//!
//! The Ornstein-Uhlenbeck process is sampled exactly through its AR(1)
//! representation: `Z_0 ~ N(0, sigma^2/(2 theta))` and
//! `Z_{j+1} = a Z_j + eps_j` with `a = exp(-theta delta)` and
//! `eps_j ~ N(0, sigma^2 (1 - a^2) / (2 theta))`. A generic Euler-Maruyama
//! fallback covers drifts without an exact scheme.
//!
//! Reproducibility contract: every replication derives a private generator
//! seed through [`substream_seed`], a pure function of
//! `(base_seed, replication_index)`. Replaying a [`SeedSpec`] reproduces a
//! path bit-for-bit within one build, independent of thread scheduling.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::{DriftSpec, OuModel};

/// Equally spaced observations `Z_j = X_{j delta}`, j = 0..n.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSample {
    delta: f64,
    values: Vec<f64>,
}

impl TimeSeriesSample {
    pub fn new(delta: f64, values: Vec<f64>) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "must be finite and > 0",
            });
        }
        if values.is_empty() {
            return Err(Error::DegenerateSample("empty observation record"));
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "values",
                value: bad,
                reason: "observations must be finite",
            });
        }
        Ok(TimeSeriesSample { delta, values })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the last observation; the record holds `n + 1` values.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample standard deviation (divisor len - 1).
    pub fn stddev(&self) -> f64 {
        let len = self.values.len();
        if len < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - m) * (v - m)).sum();
        (ss / (len - 1) as f64).sqrt()
    }

    /// Write the record as two-column CSV with header `j,z`, preceded by a
    /// metadata line `# delta=<value>` carrying the spacing.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# delta={}", self.delta)?;
        writeln!(w, "j,z")?;
        for (j, z) in self.values.iter().enumerate() {
            writeln!(w, "{j},{z}")?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut delta = None;
        let mut values = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("delta=") {
                    delta =
                        Some(v.trim().parse::<f64>().map_err(|e| {
                            parse_err(idx + 1, format!("bad delta value {v:?}: {e}"))
                        })?);
                }
                continue;
            }
            if line == "j,z" {
                continue;
            }
            let (_, z) = line
                .split_once(',')
                .ok_or_else(|| parse_err(idx + 1, format!("expected `j,z` row, got {line:?}")))?;
            values.push(
                z.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(idx + 1, format!("bad observation {z:?}: {e}")))?,
            );
        }
        let delta =
            delta.ok_or_else(|| parse_err(0, "missing `# delta=<value>` metadata line".into()))?;
        TimeSeriesSample::new(delta, values)
    }
}

/// Seed for one replication substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSpec {
    pub base_seed: u64,
    pub replication_index: u64,
}

impl SeedSpec {
    pub fn new(base_seed: u64, replication_index: u64) -> Self {
        SeedSpec {
            base_seed,
            replication_index,
        }
    }
}

/// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the 64-bit generator seed of a replication substream.
///
/// The mixing follows the SplitMix64 scheme: the replication index selects
/// the `(index + 1)`-th element of the Weyl sequence started at `base_seed`
/// (increment 0x9E3779B97F4A7C15, the golden-ratio constant), which is then
/// passed through the SplitMix64 finalizer. For a fixed base seed the map
/// is injective in the index, and the output is a pure function of the
/// inputs, so parallel replications are scheduling-independent.
pub fn substream_seed(seed: SeedSpec) -> u64 {
    let weyl = seed.base_seed.wrapping_add(
        0x9E37_79B9_7F4A_7C15u64.wrapping_mul(seed.replication_index.wrapping_add(1)),
    );
    mix64(weyl)
}

fn substream_rng(seed: SeedSpec) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed))
}

/// Exact Ornstein-Uhlenbeck sampling via the AR(1) representation.
/// Returns `n + 1` observations starting from a stationary draw.
pub fn sample_ou_exact(model: &OuModel, n: usize, seed: SeedSpec) -> Result<TimeSeriesSample> {
    if n < 1 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "need at least one transition",
        });
    }
    let a = model.ar_coefficient();
    let stationary_sd = model.stationary_variance().sqrt();
    let innovation_sd = model.transition_variance().sqrt();
    let mut rng = substream_rng(seed);
    let mut values = Vec::with_capacity(n + 1);
    let mut z = stationary_sd * rng.sample::<f64, _>(StandardNormal);
    values.push(z);
    for _ in 0..n {
        z = a * z + innovation_sd * rng.sample::<f64, _>(StandardNormal);
        values.push(z);
    }
    TimeSeriesSample::new(model.delta(), values)
}

/// Default burn-in (in recorded observations) when starting Euler-Maruyama
/// from a non-stationary initial state: several mean-reversion times at the
/// slowest rate under consideration.
pub fn default_burn_in(theta_lo: f64, delta: f64) -> usize {
    (10.0 / (theta_lo * delta)).ceil() as usize
}

/// Euler-Maruyama simulation of `dX = mu(X; theta) dt + sigma dW`.
///
/// Each recorded observation advances the state by `substeps` Euler steps of
/// size `delta / substeps`; the first `burn_in` recorded points are
/// discarded before emitting `n + 1` values.
#[allow(clippy::too_many_arguments)]
pub fn sample_euler_maruyama(
    drift: &DriftSpec,
    theta: f64,
    sigma: f64,
    delta: f64,
    substeps: usize,
    n: usize,
    burn_in: usize,
    x0: f64,
    seed: SeedSpec,
) -> Result<TimeSeriesSample> {
    if substeps < 1 {
        return Err(Error::InvalidParameter {
            name: "substeps",
            value: substeps as f64,
            reason: "need at least one Euler step per observation",
        });
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "must be finite and > 0",
        });
    }
    let dt = delta / substeps as f64;
    let sqrt_dt = dt.sqrt();
    let mut rng = substream_rng(seed);
    let mut x = x0;
    let mut values = Vec::with_capacity(n + 1);
    let total = burn_in + n + 1;
    for obs in 0..total {
        if obs > 0 {
            for sub in 0..substeps {
                let noise: f64 = rng.sample(StandardNormal);
                x += drift.mu(x, theta) * dt + sigma * sqrt_dt * noise;
                if !x.is_finite() {
                    return Err(Error::Divergence {
                        step: (obs - 1) * substeps + sub,
                    });
                }
            }
        }
        if obs >= burn_in {
            values.push(x);
        }
    }
    TimeSeriesSample::new(delta, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    fn ou(theta: f64, sigma: f64, delta: f64) -> OuModel {
        OuModel::new(theta, sigma, delta).unwrap()
    }

    #[test]
    fn ar_coefficient_and_stationarity_identity() {
        let m = ou(2.0, 1.0, 1.0);
        assert!((m.ar_coefficient() - 0.135_335_283_236_612_7).abs() < 1e-16);
        // innovation variance + a^2 * stationary variance = stationary variance
        for delta in [0.01, 0.1, 1.0, 3.0] {
            let m = ou(2.0, 1.0, delta);
            let a = m.ar_coefficient();
            let lhs = m.transition_variance() + a * a * m.stationary_variance();
            assert!((lhs - 0.25).abs() < 1e-15, "delta={delta}");
        }
    }

    #[test]
    fn small_delta_limit() {
        let m = ou(2.0, 1.0, 1e-12);
        assert!((m.ar_coefficient() - 1.0).abs() < 1e-11);
        assert!(m.transition_variance() < 1e-11);
    }

    #[test]
    fn replay_is_bit_exact() {
        let m = ou(2.0, 1.0, 0.1);
        let s = SeedSpec::new(42, 7);
        let a = sample_ou_exact(&m, 200, s).unwrap();
        let b = sample_ou_exact(&m, 200, s).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.values().len(), 201);
    }

    #[test]
    fn substream_seed_is_pure_and_collision_free() {
        let s = SeedSpec::new(987654321, 13);
        assert_eq!(substream_seed(s), substream_seed(s));
        let mut base = 0x1234_5678_9abc_def0u64;
        for _ in 0..10_000 {
            base = mix64(base.wrapping_add(1));
            let a = substream_seed(SeedSpec::new(base, 0));
            let b = substream_seed(SeedSpec::new(base, 1));
            assert_ne!(a, b, "collision at base {base:#x}");
        }
    }

    #[test]
    fn substream_seed_independent_of_evaluation_order() {
        let serial: Vec<u64> = (0..64)
            .map(|r| substream_seed(SeedSpec::new(5, r)))
            .collect();
        let parallel: Vec<u64> = (0..64u64)
            .into_par_iter()
            .map(|r| substream_seed(SeedSpec::new(5, r)))
            .collect();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn exact_sampler_matches_stationary_moments() {
        let m = ou(2.0, 1.0, 0.1);
        let s = sample_ou_exact(&m, 100_000, SeedSpec::new(2024, 0)).unwrap();
        let z = s.values();
        let n = z.len() as f64;
        let mean_sq: f64 = z.iter().map(|v| v * v).sum::<f64>() / n;
        // var of mean of Z^2 for a Gaussian AR(1): (2 s^4 / n) (1 + 2 sum_j a^{2j})
        let a2 = m.ar_coefficient() * m.ar_coefficient();
        let factor = 1.0 + 2.0 * a2 / (1.0 - a2);
        let se = (2.0 * 0.25f64.powi(2) * factor / n).sqrt();
        assert!(
            (mean_sq - 0.25).abs() < 3.0 * se,
            "mean square {mean_sq} vs 0.25 +- {}",
            3.0 * se
        );

        // lag-1 autocorrelation close to exp(-theta delta)
        let mean = s.mean();
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..z.len() - 1 {
            num += (z[j] - mean) * (z[j + 1] - mean);
        }
        for v in z {
            den += (v - mean) * (v - mean);
        }
        let rho = num / den;
        let target = 0.818_730_753_077_981_9;
        let se_rho = ((1.0 - target * target) / n).sqrt();
        assert!(
            (rho - target).abs() < 3.0 * se_rho,
            "lag-1 autocorrelation {rho} vs {target} +- {}",
            3.0 * se_rho
        );
    }

    #[test]
    fn euler_no_dynamics_is_constant() {
        let drift = DriftSpec::new(|_, _| 0.0, |_, _| 0.0, |_, _| 0.0);
        let s = sample_euler_maruyama(&drift, 1.0, 0.0, 0.5, 4, 10, 3, 1.25, SeedSpec::new(1, 0))
            .unwrap();
        assert_eq!(s.values().len(), 11);
        assert!(s.values().iter().all(|&v| v == 1.25));
    }

    #[test]
    fn euler_single_step_is_scheme_definition() {
        let drift = DriftSpec::ou();
        let (theta, sigma, delta) = (2.0, 1.0, 0.25);
        let seed = SeedSpec::new(77, 3);
        let s = sample_euler_maruyama(&drift, theta, sigma, delta, 1, 1, 0, 0.8, seed).unwrap();
        let mut rng = substream_rng(seed);
        let xi: f64 = rng.sample(StandardNormal);
        let expected = 0.8 + (-theta * 0.8) * delta + sigma * delta.sqrt() * xi;
        assert_eq!(s.values()[0], 0.8);
        assert!((s.values()[1] - expected).abs() < 1e-15);
    }

    #[test]
    fn euler_matches_exact_sampler_moments() {
        let m = ou(2.0, 1.0, 0.1);
        let burn = default_burn_in(2.0, 0.1);
        let s = sample_euler_maruyama(
            &m.drift(),
            2.0,
            1.0,
            0.1,
            200,
            100_000,
            burn,
            0.0,
            SeedSpec::new(9, 1),
        )
        .unwrap();
        let z = s.values();
        let n = z.len() as f64;
        let mean = s.mean();
        let var: f64 = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let a2 = m.ar_coefficient() * m.ar_coefficient();
        let factor = 1.0 + 2.0 * a2 / (1.0 - a2);
        let se = (2.0 * 0.25f64.powi(2) * factor / n).sqrt();
        assert!(
            (var - 0.25).abs() < 3.0 * se,
            "sample variance {var} vs 0.25 +- {}",
            3.0 * se
        );
    }

    #[test]
    fn euler_divergence_reports_step() {
        // explosive cubic drift with a crude step blows up quickly
        let drift = DriftSpec::new(|x, _| x * x * x, |_, _| 0.0, |_, _| 0.0);
        let err = sample_euler_maruyama(&drift, 1.0, 0.0, 10.0, 1, 50, 0, 5.0, SeedSpec::new(0, 0))
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let m = ou(2.0, 1.0, 0.1);
        let s = sample_ou_exact(&m, 25, SeedSpec::new(3, 4)).unwrap();
        let dir = std::env::temp_dir().join("smatch_csv_round_trip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("path.csv");
        s.write_csv_file(&path).unwrap();
        let back = TimeSeriesSample::read_csv_file(&path).unwrap();
        assert_eq!(back.delta(), s.delta());
        assert_eq!(back.values(), s.values());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn rejects_invalid_records() {
        assert!(TimeSeriesSample::new(0.0, vec![1.0]).is_err());
        assert!(TimeSeriesSample::new(0.1, vec![]).is_err());
        assert!(TimeSeriesSample::new(0.1, vec![1.0, f64::NAN]).is_err());
        assert!(sample_ou_exact(&ou(2.0, 1.0, 0.1), 0, SeedSpec::new(0, 0)).is_err());
    }
}
