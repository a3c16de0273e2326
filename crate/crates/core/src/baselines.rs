//! Competing estimators for the Ornstein-Uhlenbeck benchmark: the moment
//! estimator built on the stationary second moment, the exact maximum
//! likelihood estimator, the score function with its theta-derivative, the
//! one-step Newton-Raphson upgrade of a preliminary estimate, and the
//! efficiency bound for the mean squared error.
//!
//! The OU transition law is Gaussian with mean `a Z_j` and variance
//! `sigma^2 (1 - a^2) / (2 theta)`, `a = exp(-theta delta)`; the stationary
//! law is N(0, sigma^2 / (2 theta)). The log-likelihood is the sum of the
//! transition log-densities plus, by default, the stationary log-density
//! of the first observation. All theta-derivatives are analytic.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::ParameterInterval;
use crate::opt;
use crate::simulate::TimeSeriesSample;

type LikFn = Arc<dyn Fn(f64, &TimeSeriesSample, f64, bool) -> Result<f64> + Send + Sync>;

/// Log-likelihood, score and score derivative as functions of theta given
/// `(sample, sigma, delta)`. The OU constructor supplies exact Gaussian
/// closed forms; synthetic parts can be injected for testing estimating
/// equations.
#[derive(Clone)]
pub struct LikelihoodParts {
    pub include_stationary_term: bool,
    loglik: LikFn,
    score: LikFn,
    score_deriv: LikFn,
}

impl LikelihoodParts {
    /// Exact OU likelihood with the stationary term included (matching the
    /// likelihood of the full observation record).
    pub fn ou_exact() -> Self {
        LikelihoodParts {
            include_stationary_term: true,
            loglik: Arc::new(|t, s, sg, stat| ou_loglik_derivs(t, s, sg, stat).map(|d| d.0)),
            score: Arc::new(|t, s, sg, stat| ou_loglik_derivs(t, s, sg, stat).map(|d| d.1)),
            score_deriv: Arc::new(|t, s, sg, stat| ou_loglik_derivs(t, s, sg, stat).map(|d| d.2)),
        }
    }

    /// Same likelihood without the stationary term of the first
    /// observation (transition-only variant for sensitivity checks).
    pub fn without_stationary_term(mut self) -> Self {
        self.include_stationary_term = false;
        self
    }

    /// Inject arbitrary estimating-equation parts; closures receive
    /// `(theta, sample, sigma)`.
    pub fn from_fns(
        loglik: impl Fn(f64, &TimeSeriesSample, f64) -> f64 + Send + Sync + 'static,
        score: impl Fn(f64, &TimeSeriesSample, f64) -> f64 + Send + Sync + 'static,
        score_deriv: impl Fn(f64, &TimeSeriesSample, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        LikelihoodParts {
            include_stationary_term: true,
            loglik: Arc::new(move |t, s, sg, _| Ok(loglik(t, s, sg))),
            score: Arc::new(move |t, s, sg, _| Ok(score(t, s, sg))),
            score_deriv: Arc::new(move |t, s, sg, _| Ok(score_deriv(t, s, sg))),
        }
    }

    pub fn loglik(&self, theta: f64, sample: &TimeSeriesSample, sigma: f64) -> Result<f64> {
        (self.loglik)(theta, sample, sigma, self.include_stationary_term)
    }

    pub fn score(&self, theta: f64, sample: &TimeSeriesSample, sigma: f64) -> Result<f64> {
        (self.score)(theta, sample, sigma, self.include_stationary_term)
    }

    pub fn score_deriv(&self, theta: f64, sample: &TimeSeriesSample, sigma: f64) -> Result<f64> {
        (self.score_deriv)(theta, sample, sigma, self.include_stationary_term)
    }
}

impl fmt::Debug for LikelihoodParts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LikelihoodParts")
            .field("include_stationary_term", &self.include_stationary_term)
            .finish()
    }
}

/// Value and first two theta-derivatives of `log N(r + mean; mean, v)`
/// where the residual `r`, its derivatives `r1, r2`, the variance `v` and
/// its derivatives `v1, v2` are all functions of theta.
fn gaussian_log_derivs(r: f64, r1: f64, r2: f64, v: f64, v1: f64, v2: f64) -> (f64, f64, f64) {
    let l = -0.5 * (2.0 * std::f64::consts::PI * v).ln() - r * r / (2.0 * v);
    let l1 = -v1 / (2.0 * v) - r * r1 / v + r * r * v1 / (2.0 * v * v);
    let l2 = -v2 / (2.0 * v) + v1 * v1 / (2.0 * v * v) - (r1 * r1 + r * r2) / v
        + 2.0 * r * r1 * v1 / (v * v)
        + r * r * v2 / (2.0 * v * v)
        - r * r * v1 * v1 / (v * v * v);
    (l, l1, l2)
}

/// Log-likelihood of an OU record together with its first two
/// theta-derivatives (score and score derivative).
fn ou_loglik_derivs(
    theta: f64,
    sample: &TimeSeriesSample,
    sigma: f64,
    include_stationary_term: bool,
) -> Result<(f64, f64, f64)> {
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "likelihood requires theta > 0",
        });
    }
    let delta = sample.delta();
    let z = sample.values();
    let sig2 = sigma * sigma;

    let a = (-theta * delta).exp();
    let a1 = -delta * a;
    let a2 = delta * delta * a;
    let one_m_a2 = 1.0 - a * a;
    let v = sig2 * one_m_a2 / (2.0 * theta);
    let v1 = sig2 * (2.0 * delta * theta * a * a - one_m_a2) / (2.0 * theta * theta);
    let v2 = sig2
        * (-4.0 * theta * theta * delta * delta * a * a - 4.0 * delta * theta * a * a + 2.0
            - 2.0 * a * a)
        / (2.0 * theta * theta * theta);

    let mut l = 0.0;
    let mut s = 0.0;
    let mut sd = 0.0;
    for j in 0..z.len() - 1 {
        let r = z[j + 1] - a * z[j];
        let r1 = -a1 * z[j];
        let r2 = -a2 * z[j];
        let (tl, ts, tsd) = gaussian_log_derivs(r, r1, r2, v, v1, v2);
        l += tl;
        s += ts;
        sd += tsd;
    }
    if include_stationary_term {
        let u = sig2 / (2.0 * theta);
        let u1 = -u / theta;
        let u2 = 2.0 * u / (theta * theta);
        let (tl, ts, tsd) = gaussian_log_derivs(z[0], 0.0, 0.0, u, u1, u2);
        l += tl;
        s += ts;
        sd += tsd;
    }
    Ok((l, s, sd))
}

/// Moment estimator `theta* = sigma^2 n / (2 sum_{j=0}^{n-1} Z_j^2)` built
/// on the stationary second moment; the sum excludes the last observation.
pub fn kessler_estimator(sample: &TimeSeriesSample, sigma: f64) -> Result<f64> {
    let z = sample.values();
    let n = sample.n();
    let sum: f64 = z[..n].iter().map(|v| v * v).sum();
    if sum.is_nan() || sum <= 0.0 {
        return Err(Error::DegenerateSample(
            "all squared observations vanish in the moment estimator",
        ));
    }
    Ok(sigma * sigma * n as f64 / (2.0 * sum))
}

/// Exact maximum likelihood estimator over the parameter interval: coarse
/// scan (64 points) plus golden section, then a short Newton polish of the
/// score root when the maximizer is interior.
pub fn ou_mle(sample: &TimeSeriesSample, sigma: f64, space: ParameterInterval) -> Result<f64> {
    ou_mle_with_parts(sample, sigma, space, &LikelihoodParts::ou_exact())
}

pub fn ou_mle_with_parts(
    sample: &TimeSeriesSample,
    sigma: f64,
    space: ParameterInterval,
    parts: &LikelihoodParts,
) -> Result<f64> {
    if space.lo() <= 0.0 {
        return Err(Error::Config(format!(
            "likelihood search interval must stay within (0, inf), got lo = {}",
            space.lo()
        )));
    }
    let ll = |t: f64| parts.loglik(t, sample, sigma).unwrap_or(f64::NEG_INFINITY);
    let (golden, _) = opt::maximize_scan_golden(ll, space.lo(), space.hi(), 64, 1e-10);

    // polish the interior stationary point with the analytic score; golden
    // section alone cannot locate the maximizer below the sqrt(eps)
    // flatness scale, while the score stays informative down to its root
    let mut theta = golden;
    if space.is_interior(theta) {
        let mut t = theta;
        for _ in 0..8 {
            let s = parts.score(t, sample, sigma)?;
            let sd = parts.score_deriv(t, sample, sigma)?;
            if sd.abs() <= 1e-12 || sd.is_nan() {
                break;
            }
            let next = t - s / sd;
            if !next.is_finite() || !space.contains(next) || (next - golden).abs() > 1e-6 {
                break;
            }
            let done = (next - t).abs() < 1e-13;
            t = next;
            if done {
                break;
            }
        }
        let improved = match (
            parts.score(t, sample, sigma),
            parts.score(theta, sample, sigma),
        ) {
            (Ok(st), Ok(sg)) => st.abs() <= sg.abs(),
            _ => false,
        };
        if improved {
            theta = t;
        }
    }
    Ok(theta)
}

/// Outcome of one Newton-Raphson step on an estimating equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneStepResult {
    pub theta_bar: f64,
    pub preliminary: f64,
    /// `theta_bar - preliminary`; reflects clamping when it occurred.
    pub newton_increment: f64,
    pub clamped: bool,
}

/// One Newton-Raphson step on the score equation from a preliminary
/// estimate: `theta_bar = preliminary - score / score'`, clamped to the
/// parameter interval with a diagnostic flag.
pub fn one_step(
    preliminary: f64,
    sample: &TimeSeriesSample,
    sigma: f64,
    parts: &LikelihoodParts,
    space: ParameterInterval,
) -> Result<OneStepResult> {
    let s = parts.score(preliminary, sample, sigma)?;
    let sd = parts.score_deriv(preliminary, sample, sigma)?;
    if sd.abs() <= 1e-12 || sd.is_nan() {
        return Err(Error::SingularStep {
            theta: preliminary,
            value: sd,
        });
    }
    let raw = preliminary - s / sd;
    let theta_bar = space.clamp(raw);
    Ok(OneStepResult {
        theta_bar,
        preliminary,
        newton_increment: theta_bar - preliminary,
        clamped: theta_bar != raw,
    })
}

/// Optimal mean squared error `1 / ((n+1) I_delta(theta))` where
/// `I_delta` is the per-transition Fisher information of the Gaussian
/// transition law under stationarity:
///
/// ```text
/// I_delta(theta) = E[Z^2] (da/dtheta)^2 / v + (dv/dtheta)^2 / (2 v^2),
/// ```
///
/// with `a = exp(-theta delta)`, `v = sigma^2 (1 - a^2)/(2 theta)` and
/// `E[Z^2] = sigma^2 / (2 theta)`. As `delta -> 0` this approaches the
/// continuous-record bound `2 theta / ((n+1) delta)`.
pub fn efficiency_bound(theta: f64, sigma: f64, delta: f64, n_plus_1: usize) -> f64 {
    let sig2 = sigma * sigma;
    let a = (-theta * delta).exp();
    let da = -delta * a;
    let one_m_a2 = 1.0 - a * a;
    let v = sig2 * one_m_a2 / (2.0 * theta);
    let dv = sig2 * (2.0 * delta * theta * a * a - one_m_a2) / (2.0 * theta * theta);
    let second_moment = sig2 / (2.0 * theta);
    let info = second_moment * da * da / v + dv * dv / (2.0 * v * v);
    1.0 / (n_plus_1 as f64 * info)
}
