//! Matching step: the weighted least-squares criterion on the stationary
//! ODE residual, its minimizer over the parameter interval, closed forms
//! for drifts linear in theta, and quasi-optimality bandwidth selection.
//!
//! The criterion is
//!
//! ```text
//! R_n(theta) = int ( mu(x; theta) pi_hat(x) - (sigma^2/2) pi_hat'(x) )^2 w(x) dx,
//! ```
//!
//! computed by composite trapezoid quadrature on a uniform grid over the
//! support of `w`. The density values are cached on the grid once per
//! bandwidth, so a criterion evaluation is a single weighted sum. For
//! drifts linear in theta the criterion is an exact quadratic
//! `A theta^2 + 2 B theta + C` whose coefficients are accumulated up
//! front; the minimizer then has the closed form `-B/A`.
//!
//! Bandwidth selection follows the quasi-optimality rule: compute the
//! estimate along a decreasing bandwidth grid and keep the bandwidth whose
//! successor changes the estimate the least.

use crate::error::{Error, Result};
use crate::kde::{DensityEstimate, Kernel, WeightFunction};
use crate::models::{DriftSpec, ParameterInterval};
use crate::opt;
use crate::quad::UniformGrid;
use crate::simulate::TimeSeriesSample;

/// How a point estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Coarse scan plus golden-section refinement of the criterion.
    GridGolden,
    /// Weighted least-squares closed form for drifts linear in theta.
    ClosedForm,
}

/// Point estimate produced by the matching step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmEstimate {
    pub theta_hat: f64,
    pub bandwidth: Option<f64>,
    pub criterion_value: f64,
    pub method: Method,
    /// Set when a closed-form value fell outside the parameter interval
    /// and was clamped to its boundary.
    pub clamped: bool,
}

/// Quadratic coefficients of the criterion for drifts linear in theta:
/// `R(theta) = a theta^2 + 2 b theta + c`.
#[derive(Debug, Clone, Copy)]
struct QuadraticForm {
    a: f64,
    b: f64,
    c: f64,
}

/// Criterion evaluator over a fixed quadrature grid with cached density
/// values. Immutable; criterion evaluations from multiple threads are safe.
pub struct CriterionContext {
    drift: DriftSpec,
    sigma: f64,
    xs: Vec<f64>,
    pi: Vec<f64>,
    dpi: Vec<f64>,
    /// `w(x_i)` times the trapezoid weight of node i.
    wq: Vec<f64>,
    bandwidth: Option<f64>,
    quadratic: Option<QuadraticForm>,
}

impl CriterionContext {
    /// Build the context from a kernel density estimate.
    pub fn new(
        density: &DensityEstimate,
        drift: DriftSpec,
        sigma: f64,
        weight: &WeightFunction,
        grid: &UniformGrid,
    ) -> Result<Self> {
        Self::validate_grid(weight, grid)?;
        let xs = grid.points();
        let (pi, dpi) = density.eval_with_deriv_many(&xs);
        Ok(Self::assemble(
            drift,
            sigma,
            weight,
            grid,
            xs,
            pi,
            dpi,
            Some(density.bandwidth()),
        ))
    }

    /// Build the context from arbitrary density evaluators, e.g. a known
    /// closed-form stationary density.
    pub fn from_density_fns(
        pi: impl Fn(f64) -> f64,
        pi_prime: impl Fn(f64) -> f64,
        drift: DriftSpec,
        sigma: f64,
        weight: &WeightFunction,
        grid: &UniformGrid,
    ) -> Result<Self> {
        Self::validate_grid(weight, grid)?;
        let xs = grid.points();
        let pi_vals: Vec<f64> = xs.iter().map(|&x| pi(x)).collect();
        let dpi_vals: Vec<f64> = xs.iter().map(|&x| pi_prime(x)).collect();
        Ok(Self::assemble(
            drift, sigma, weight, grid, xs, pi_vals, dpi_vals, None,
        ))
    }

    fn validate_grid(weight: &WeightFunction, grid: &UniformGrid) -> Result<()> {
        let (lo, hi) = weight.support();
        let tol = 1e-12 * hi.abs().max(1.0);
        if (grid.lo() - lo).abs() > tol || (grid.hi() - hi).abs() > tol {
            return Err(Error::Config(format!(
                "quadrature grid [{}, {}] must span the weight support [{lo}, {hi}]",
                grid.lo(),
                grid.hi()
            )));
        }
        if grid.nodes() < 101 || grid.nodes().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "quadrature grid needs an odd node count >= 101, got {}",
                grid.nodes()
            )));
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        drift: DriftSpec,
        sigma: f64,
        weight: &WeightFunction,
        grid: &UniformGrid,
        xs: Vec<f64>,
        pi: Vec<f64>,
        dpi: Vec<f64>,
        bandwidth: Option<f64>,
    ) -> Self {
        let wq: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| weight.eval(x) * grid.trapezoid_weight(i))
            .collect();
        let quadratic = drift.linear_decomposition().map(|lin| {
            let half_sig2 = 0.5 * sigma * sigma;
            let mut a = 0.0;
            let mut b = 0.0;
            let mut c = 0.0;
            for i in 0..xs.len() {
                let p = lin.m(xs[i]) * pi[i];
                let g = lin.b(xs[i]) * pi[i] - half_sig2 * dpi[i];
                a += p * p * wq[i];
                b += p * g * wq[i];
                c += g * g * wq[i];
            }
            QuadraticForm { a, b, c }
        });
        CriterionContext {
            drift,
            sigma,
            xs,
            pi,
            dpi,
            wq,
            bandwidth,
            quadratic,
        }
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    /// `R_n(theta)`: quadrature of the squared stationary-ODE residual
    /// against the weight. Nonnegative.
    pub fn criterion(&self, theta: f64) -> f64 {
        if let Some(q) = &self.quadratic {
            // exact quadratic in theta; clip the rounding dust that the
            // expanded form can leave below zero
            return (q.a * theta * theta + 2.0 * q.b * theta + q.c).max(0.0);
        }
        let half_sig2 = 0.5 * self.sigma * self.sigma;
        let mut acc = 0.0;
        for i in 0..self.xs.len() {
            let r = self.drift.mu(self.xs[i], theta) * self.pi[i] - half_sig2 * self.dpi[i];
            acc += r * r * self.wq[i];
        }
        acc
    }

    /// Minimize the criterion over the parameter interval: coarse scan over
    /// 64 equally spaced values, golden-section refinement in the best
    /// bracket, scan ties broken toward smaller theta.
    pub fn minimize(&self, space: ParameterInterval) -> SmEstimate {
        let (theta, value) =
            opt::minimize_scan_golden(|t| self.criterion(t), space.lo(), space.hi(), 64, 1e-10);
        SmEstimate {
            theta_hat: theta,
            bandwidth: self.bandwidth,
            criterion_value: value.max(0.0),
            method: Method::GridGolden,
            clamped: false,
        }
    }

    /// Closed form for the mean-reverting linear drift `mu = -theta x`:
    ///
    /// ```text
    /// theta_hat = -(sigma^2/2) int x pi pi' w dx / int x^2 pi^2 w dx,
    /// ```
    ///
    /// clamped to the parameter interval with a diagnostic flag.
    pub fn ou_closed_form(&self, space: ParameterInterval) -> Result<SmEstimate> {
        let lin = self
            .drift
            .linear_decomposition()
            .ok_or_else(|| Error::Config("closed form needs a drift linear in theta".into()))?;
        for probe in [-2.0, -0.5, 0.0, 1.0, 3.0] {
            if (lin.m(probe) + probe).abs() > 1e-12 * probe.abs().max(1.0)
                || lin.b(probe).abs() > 1e-12
            {
                return Err(Error::Config(
                    "closed form requires m(x) = -x and b = 0".into(),
                ));
            }
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.xs.len() {
            let x = self.xs[i];
            num += x * self.pi[i] * self.dpi[i] * self.wq[i];
            den += x * x * self.pi[i] * self.pi[i] * self.wq[i];
        }
        self.finish_closed_form(-(0.5 * self.sigma * self.sigma) * num, den, space)
    }

    /// Weighted least-squares closed form for any drift linear in theta,
    /// `mu = theta m(x) + b(x)`:
    ///
    /// ```text
    /// theta_hat = - int m pi g w dx / int m^2 pi^2 w dx,
    /// g(x) = b(x) pi(x) - (sigma^2/2) pi'(x).
    /// ```
    pub fn linear_closed_form(&self, space: ParameterInterval) -> Result<SmEstimate> {
        let q = self
            .quadratic
            .as_ref()
            .ok_or_else(|| Error::Config("closed form needs a drift linear in theta".into()))?;
        self.finish_closed_form(-q.b, q.a, space)
    }

    fn finish_closed_form(
        &self,
        num: f64,
        den: f64,
        space: ParameterInterval,
    ) -> Result<SmEstimate> {
        if den.abs() <= 1e-14 || den.is_nan() {
            return Err(Error::DegenerateSample(
                "vanishing denominator in the closed-form estimate",
            ));
        }
        let raw = num / den;
        let theta = space.clamp(raw);
        Ok(SmEstimate {
            theta_hat: theta,
            bandwidth: self.bandwidth,
            criterion_value: self.criterion(theta),
            method: Method::ClosedForm,
            clamped: theta != raw,
        })
    }
}

/// Quasi-optimality bandwidth selection over a strictly decreasing grid:
/// compute the estimate for every bandwidth, pick the index minimizing the
/// change `|theta(h_{i+1}) - theta(h_i)|`, ties broken toward the larger
/// bandwidth. Returns the estimate at the selected bandwidth.
pub fn quasi_optimal_bandwidth(
    h_grid: &[f64],
    mut estimate_at: impl FnMut(f64) -> Result<SmEstimate>,
) -> Result<SmEstimate> {
    if h_grid.len() < 3 {
        return Err(Error::Config(format!(
            "quasi-optimality needs at least 3 bandwidths, got {}",
            h_grid.len()
        )));
    }
    if h_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "bandwidth grid must be strictly decreasing".into(),
        ));
    }
    let mut estimates = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let mut est = estimate_at(h)?;
        est.bandwidth = Some(h);
        estimates.push(est);
    }
    let mut best = 0;
    let mut best_diff = f64::INFINITY;
    for i in 0..estimates.len() - 1 {
        let diff = (estimates[i + 1].theta_hat - estimates[i].theta_hat).abs();
        if diff < best_diff {
            best_diff = diff;
            best = i;
        }
    }
    Ok(estimates[best])
}

/// Geometric bandwidth grid `h_max * ratio^i`, i = 0..len, anchored at
/// `h_max = scale * stddev(sample) * (n+1)^(-1/8)`.
pub fn default_bandwidth_grid(
    sample: &TimeSeriesSample,
    len: usize,
    ratio: f64,
    scale: f64,
) -> Result<Vec<f64>> {
    let sd = sample.stddev();
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::DegenerateSample(
            "sample standard deviation is zero; no bandwidth scale",
        ));
    }
    let h_max = scale * sd * (sample.values().len() as f64).powf(-0.125);
    Ok((0..len).map(|i| h_max * ratio.powi(i as i32)).collect())
}

/// Bandwidth policy for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthSelection {
    /// Quasi-optimality over the default geometric grid.
    QuasiOptimal,
    Fixed(f64),
}

/// Configuration of the end-to-end smooth-and-match fit.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub space: ParameterInterval,
    pub bandwidth: BandwidthSelection,
    /// Node count of the quadrature grid over the weight support.
    pub grid_nodes: usize,
    pub h_grid_len: usize,
    pub h_grid_ratio: f64,
    /// Multiplier on the `stddev * (n+1)^(-1/8)` bandwidth anchor.
    pub h_max_scale: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            space: ParameterInterval::default(),
            bandwidth: BandwidthSelection::QuasiOptimal,
            grid_nodes: 2001,
            h_grid_len: 30,
            h_grid_ratio: 0.9,
            h_max_scale: 2.5,
        }
    }
}

/// Smooth-and-match fit: kernel-smooth the sample at each candidate
/// bandwidth, minimize the criterion over the parameter interval, and
/// select the bandwidth by quasi-optimality (or use the fixed one).
pub fn fit(
    sample: &TimeSeriesSample,
    drift: &DriftSpec,
    sigma: f64,
    kernel: &Kernel,
    weight: &WeightFunction,
    cfg: &FitConfig,
) -> Result<SmEstimate> {
    let (lo, hi) = weight.support();
    let grid = UniformGrid::new(lo, hi, cfg.grid_nodes)?;
    let run_at = |h: f64| -> Result<SmEstimate> {
        let density = DensityEstimate::new(sample, h, kernel.clone())?;
        let ctx = CriterionContext::new(&density, drift.clone(), sigma, weight, &grid)?;
        Ok(ctx.minimize(cfg.space))
    };
    match cfg.bandwidth {
        BandwidthSelection::Fixed(h) => run_at(h),
        BandwidthSelection::QuasiOptimal => {
            let h_grid =
                default_bandwidth_grid(sample, cfg.h_grid_len, cfg.h_grid_ratio, cfg.h_max_scale)?;
            quasi_optimal_bandwidth(&h_grid, run_at)
        }
    }
}
