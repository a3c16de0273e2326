//! Smoothing step: kernels, weight functions and the kernel density
//! estimator of the invariant density.
//!
//! The estimator and its derivative are
//!
//! ```text
//! pi_hat(x)  = 1/((n+1) h)   sum_j K((x - Z_j)/h)
//! pi_hat'(x) = 1/((n+1) h^2) sum_j K'((x - Z_j)/h)
//! ```
//!
//! with a compactly supported kernel of declared moment order alpha
//! (moments 1..alpha vanish). The shipped kernel is the order-4 polynomial
//! `K(u) = (105/64 - (315/64) u^2)(1 - u^2)^2` on `|u| <= 1`; its fourth
//! moment is -1/33, so the order is exactly 4. Higher-order kernels take
//! negative values and so can the estimate; no truncation at zero is
//! applied because the matching criterion never requires nonnegativity.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::UniformGrid;
use crate::simulate::TimeSeriesSample;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Compactly supported smoothing kernel with derivative and declared
/// moment order.
#[derive(Clone)]
pub struct Kernel {
    eval: RealFn,
    deriv: RealFn,
    support_halfwidth: f64,
    declared_order: u32,
}

impl Kernel {
    /// Order-4 kernel `(105/64 - (315/64) u^2)(1 - u^2)^2` on `|u| <= 1`.
    ///
    /// Expanded, `K(u) = (105/64)(1 - 5u^2 + 7u^4 - 3u^6)`, with derivative
    /// `K'(u) = (105/64)(-10u + 28u^3 - 18u^5)`. Both vanish at the support
    /// boundary, so the kernel is continuously differentiable on all of R.
    pub fn biweight_order4() -> Self {
        Kernel {
            eval: Arc::new(|u: f64| {
                if u.abs() > 1.0 {
                    0.0
                } else {
                    let u2 = u * u;
                    (105.0 / 64.0) * (1.0 + u2 * (-5.0 + u2 * (7.0 - 3.0 * u2)))
                }
            }),
            deriv: Arc::new(|u: f64| {
                if u.abs() > 1.0 {
                    0.0
                } else {
                    let u2 = u * u;
                    (105.0 / 64.0) * u * (-10.0 + u2 * (28.0 - 18.0 * u2))
                }
            }),
            support_halfwidth: 1.0,
            declared_order: 4,
        }
    }

    pub fn from_fns(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support_halfwidth: f64,
        declared_order: u32,
    ) -> Self {
        Kernel {
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            support_halfwidth,
            declared_order,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.eval)(u)
    }

    pub fn deriv(&self, u: f64) -> f64 {
        (self.deriv)(u)
    }

    pub fn support_halfwidth(&self) -> f64 {
        self.support_halfwidth
    }

    pub fn declared_order(&self) -> u32 {
        self.declared_order
    }

    /// `int u^l K(u) du` over the support by composite Simpson quadrature
    /// on 2001 nodes. Accurate to well below 1e-9 for polynomial kernels;
    /// intended for l <= 8.
    pub fn moment(&self, l: u32) -> f64 {
        assert!(l <= 8, "kernel moments supported up to order 8");
        let w = self.support_halfwidth;
        let grid = UniformGrid::new(-w, w, 2001).expect("valid kernel support");
        grid.integrate_simpson(|u| u.powi(l as i32) * self.eval(u))
    }

    /// Check the kernel contract: even, vanishing outside the support,
    /// derivative consistent with finite differences, unit mass and
    /// vanishing moments 1..declared_order.
    pub fn validate(&self) -> Result<()> {
        let w = self.support_halfwidth;
        for i in 0..=200 {
            let u = -w + 2.0 * w * i as f64 / 200.0;
            if (self.eval(u) - self.eval(-u)).abs() > 1e-12 {
                return Err(Error::Config(format!("kernel is not even at u={u}")));
            }
            if i > 0 && i < 200 {
                let h = 1e-6;
                let fd = (self.eval(u + h) - self.eval(u - h)) / (2.0 * h);
                if (fd - self.deriv(u)).abs() > 1e-6 * fd.abs().max(1.0) {
                    return Err(Error::Config(format!(
                        "kernel derivative mismatch at u={u}"
                    )));
                }
            }
        }
        for probe in [1.0001, 1.5, 10.0] {
            if self.eval(w * probe) != 0.0 || self.eval(-w * probe) != 0.0 {
                return Err(Error::Config("kernel does not vanish off support".into()));
            }
        }
        if (self.moment(0) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("kernel mass is not 1".into()));
        }
        // order alpha: moments below alpha vanish, the alpha-th is the
        // first nonzero one
        for l in 1..self.declared_order {
            if self.moment(l).abs() > 1e-9 {
                return Err(Error::Config(format!("kernel moment {l} does not vanish")));
            }
        }
        if self.moment(self.declared_order).abs() < 1e-9 {
            return Err(Error::Config(format!(
                "kernel moment {} vanishes; declared order is not exact",
                self.declared_order
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("support_halfwidth", &self.support_halfwidth)
            .field("declared_order", &self.declared_order)
            .finish()
    }
}

/// Smooth plateau-and-cutoff profile: 1 on `|x| <= c`, 0 on `|x| >= 1`,
/// and `exp[-beta exp(-beta/(|x|-c)^2) / (|x|-1)^2]` in between. The
/// transition is infinitely differentiable with all derivatives vanishing
/// at both ends.
pub fn weight_lambda(x: f64, c: f64, beta: f64) -> f64 {
    assert!(c > 0.0 && c < 1.0, "need 0 < c < 1");
    assert!(beta > 0.0, "need beta > 0");
    let t = x.abs();
    if t <= c {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let u = t - c;
        let s = t - 1.0;
        (-beta * (-beta / (u * u)).exp() / (s * s)).exp()
    }
}

/// Derivative of [`weight_lambda`] in the transition band (`c < |x| < 1`),
/// by the chain rule; odd in `x`, zero elsewhere.
fn weight_lambda_deriv(x: f64, c: f64, beta: f64) -> f64 {
    let t = x.abs();
    if t <= c || t >= 1.0 {
        return 0.0;
    }
    let u = t - c;
    let s = t - 1.0;
    let inner = (-beta / (u * u)).exp();
    let g = -beta * inner / (s * s);
    // g'(t) = -beta inner [ 2 beta / (u^3 s^2) - 2 / s^3 ]
    let gprime = -beta * inner * (2.0 * beta / (u * u * u * s * s) - 2.0 / (s * s * s));
    let lam = g.exp();
    lam * gprime * x.signum()
}

/// Nonnegative, compactly supported weight for the matching criterion.
#[derive(Clone)]
pub struct WeightFunction {
    eval: RealFn,
    deriv: RealFn,
    half_width: f64,
}

impl WeightFunction {
    /// Plateau profile rescaled to the support `[-half_width, half_width]`:
    /// `w(x) = lambda_{c,beta}(x / half_width)`. The plateau value 1 covers
    /// `|x| <= c * half_width`, and only the argument is rescaled; the
    /// criterion's minimizer is invariant to positive scaling of `w`.
    pub fn plateau(c: f64, beta: f64, half_width: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParameter {
                name: "c",
                value: c,
                reason: "need 0 < c < 1",
            });
        }
        if beta <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must be > 0",
            });
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter {
                name: "half_width",
                value: half_width,
                reason: "must be finite and > 0",
            });
        }
        Ok(WeightFunction {
            eval: Arc::new(move |x| weight_lambda(x / half_width, c, beta)),
            deriv: Arc::new(move |x| weight_lambda_deriv(x / half_width, c, beta) / half_width),
            half_width,
        })
    }

    pub fn from_fns(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        half_width: f64,
    ) -> Self {
        WeightFunction {
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            half_width,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (self.deriv)(x)
    }

    /// Support `[-L, L]` as `(lo, hi)`.
    pub fn support(&self) -> (f64, f64) {
        (-self.half_width, self.half_width)
    }
}

impl Default for WeightFunction {
    /// The experiment default: plateau profile with c = 0.7, beta = 0.5 on
    /// the support `[-1.4, 1.4]`, so the weight equals 1 on `[-0.98, 0.98]`.
    fn default() -> Self {
        WeightFunction::plateau(0.7, 0.5, 1.4).expect("valid default weight")
    }
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction")
            .field("half_width", &self.half_width)
            .finish()
    }
}

/// Bandwidth-indexed evaluators for `pi_hat` and `pi_hat'` built from a
/// sample. Immutable after construction; evaluation at many points is a
/// read-only parallel map.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    sorted: Vec<f64>,
    bandwidth: f64,
    kernel: Kernel,
    delta: f64,
}

impl DensityEstimate {
    pub fn new(sample: &TimeSeriesSample, bandwidth: f64, kernel: Kernel) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidParameter {
                name: "bandwidth",
                value: bandwidth,
                reason: "must be finite and > 0",
            });
        }
        let mut sorted = sample.values().to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(DensityEstimate {
            sorted,
            bandwidth,
            kernel,
            delta: sample.delta(),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sample_delta(&self) -> f64 {
        self.delta
    }

    /// Observations that can contribute at `x`: the kernel support window
    /// `[x - rh, x + rh]` located by binary search in the sorted record.
    fn window(&self, x: f64) -> &[f64] {
        let r = self.kernel.support_halfwidth() * self.bandwidth;
        let lo = self.sorted.partition_point(|&z| z < x - r);
        let hi = self.sorted.partition_point(|&z| z <= x + r);
        &self.sorted[lo..hi]
    }

    /// `pi_hat(x)`; may be negative for kernels of order above 2.
    pub fn eval(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self
            .window(x)
            .iter()
            .map(|&z| self.kernel.eval((x - z) / h))
            .sum();
        sum / (self.sorted.len() as f64 * h)
    }

    /// `pi_hat'(x)`.
    pub fn deriv(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self
            .window(x)
            .iter()
            .map(|&z| self.kernel.deriv((x - z) / h))
            .sum();
        sum / (self.sorted.len() as f64 * h * h)
    }

    /// `pi_hat` and `pi_hat'` at `x` in one pass over the window.
    pub fn eval_with_deriv(&self, x: f64) -> (f64, f64) {
        let h = self.bandwidth;
        let mut k_sum = 0.0;
        let mut d_sum = 0.0;
        for &z in self.window(x) {
            let u = (x - z) / h;
            k_sum += self.kernel.eval(u);
            d_sum += self.kernel.deriv(u);
        }
        let scale = self.sorted.len() as f64 * h;
        (k_sum / scale, d_sum / (scale * h))
    }

    /// Evaluate the density on many points in parallel. Each point is an
    /// independent read-only sum, so the result does not depend on
    /// scheduling.
    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.par_iter().map(|&x| self.eval(x)).collect()
    }

    pub fn deriv_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.par_iter().map(|&x| self.deriv(x)).collect()
    }

    pub fn eval_with_deriv_many(&self, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        xs.par_iter().map(|&x| self.eval_with_deriv(x)).unzip()
    }

    /// Hull `[min Z - rh, max Z + rh]` outside which the estimate vanishes.
    pub fn support_hull(&self) -> (f64, f64) {
        let r = self.kernel.support_halfwidth() * self.bandwidth;
        (self.sorted[0] - r, self.sorted[self.sorted.len() - 1] + r)
    }
}

/// Weighted integrated squared errors of a density estimate against a known
/// truth: `(int (pi_hat - pi)^2 w dx, int (pi_hat' - pi')^2 w dx)` by
/// trapezoid quadrature on the given grid.
pub fn empirical_wise(
    estimate: &DensityEstimate,
    truth: impl Fn(f64) -> f64,
    truth_deriv: impl Fn(f64) -> f64,
    weight: &WeightFunction,
    grid: &UniformGrid,
) -> (f64, f64) {
    let mut acc0 = 0.0;
    let mut acc1 = 0.0;
    let pts = grid.points();
    for (i, &x) in pts.iter().enumerate() {
        let w = weight.eval(x) * grid.trapezoid_weight(i);
        if w == 0.0 {
            continue;
        }
        let (p, dp) = estimate.eval_with_deriv(x);
        let e0 = p - truth(x);
        let e1 = dp - truth_deriv(x);
        acc0 += e0 * e0 * w;
        acc1 += e1 * e1 * w;
    }
    (acc0, acc1)
}
