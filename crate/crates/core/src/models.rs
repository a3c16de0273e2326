//! Parametric diffusion models.
//!
//! The estimation target is the drift parameter of
//!
//! ```text
//! dX_t = mu(X_t; theta) dt + sigma dW_t
//! ```
//!
//! with constant known dispersion `sigma`. The invariant density `pi` of an
//! ergodic solution satisfies the stationary ODE
//!
//! ```text
//! mu(x; theta) pi(x) - (sigma^2 / 2) pi'(x) = 0,
//! ```
//!
//! which is the identity the matching step exploits. The Ornstein-Uhlenbeck
//! model `mu(x; theta) = -theta x` is the workhorse: its stationary law is
//! N(0, sigma^2 / (2 theta)) and its transition law is Gaussian AR(1), so
//! everything downstream (exact sampling, likelihood, efficiency bound) has
//! a closed form.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type StateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type DriftFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Decomposition `mu(x; theta) = theta * m(x) + b(x)` of a drift that is
/// linear in the parameter.
#[derive(Clone)]
pub struct LinearDecomposition {
    m: StateFn,
    b: StateFn,
}

impl LinearDecomposition {
    pub fn m(&self, x: f64) -> f64 {
        (self.m)(x)
    }

    pub fn b(&self, x: f64) -> f64 {
        (self.b)(x)
    }
}

/// Parametric drift `mu(x; theta)` together with its first two
/// theta-derivatives. Derivatives are analytic: both the Newton step and
/// the criterion derivatives consume them, and closed forms exist for all
/// shipped models.
#[derive(Clone)]
pub struct DriftSpec {
    mu: DriftFn,
    dmu_dtheta: DriftFn,
    d2mu_dtheta2: DriftFn,
    linear: Option<LinearDecomposition>,
}

impl DriftSpec {
    pub fn new(
        mu: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dmu_dtheta: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        d2mu_dtheta2: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        DriftSpec {
            mu: Arc::new(mu),
            dmu_dtheta: Arc::new(dmu_dtheta),
            d2mu_dtheta2: Arc::new(d2mu_dtheta2),
            linear: None,
        }
    }

    /// Drift linear in theta: `mu(x; theta) = theta * m(x) + b(x)`.
    /// Theta-derivatives follow directly from the decomposition.
    pub fn linear_in_theta(
        m: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let m: StateFn = Arc::new(m);
        let b: StateFn = Arc::new(b);
        let (mc, bc) = (m.clone(), b.clone());
        let md = m.clone();
        DriftSpec {
            mu: Arc::new(move |x, theta| theta * mc(x) + bc(x)),
            dmu_dtheta: Arc::new(move |x, _| md(x)),
            d2mu_dtheta2: Arc::new(|_, _| 0.0),
            linear: Some(LinearDecomposition { m, b }),
        }
    }

    /// Mean-reverting Ornstein-Uhlenbeck drift `mu(x; theta) = -theta x`.
    pub fn ou() -> Self {
        Self::linear_in_theta(|x| -x, |_| 0.0)
    }

    pub fn mu(&self, x: f64, theta: f64) -> f64 {
        (self.mu)(x, theta)
    }

    pub fn dmu_dtheta(&self, x: f64, theta: f64) -> f64 {
        (self.dmu_dtheta)(x, theta)
    }

    pub fn d2mu_dtheta2(&self, x: f64, theta: f64) -> f64 {
        (self.d2mu_dtheta2)(x, theta)
    }

    pub fn linear_decomposition(&self) -> Option<&LinearDecomposition> {
        self.linear.as_ref()
    }
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftSpec")
            .field("linear_in_theta", &self.linear.is_some())
            .finish()
    }
}

/// Ornstein-Uhlenbeck model with observation spacing `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuModel {
    theta: f64,
    sigma: f64,
    delta: f64,
}

impl OuModel {
    pub fn new(theta: f64, sigma: f64, delta: f64) -> Result<Self> {
        let check = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and > 0",
                })
            }
        };
        check("theta", theta)?;
        check("sigma", sigma)?;
        check("delta", delta)?;
        Ok(OuModel {
            theta,
            sigma,
            delta,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Variance of the stationary law, `sigma^2 / (2 theta)`.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta)
    }

    /// Gaussian stationary density N(0, sigma^2 / (2 theta)) at `x`.
    pub fn stationary_density(&self, x: f64) -> f64 {
        let v = self.stationary_variance();
        (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
    }

    /// x-derivative of the stationary density.
    pub fn stationary_density_deriv(&self, x: f64) -> f64 {
        -x / self.stationary_variance() * self.stationary_density(x)
    }

    /// AR(1) coefficient of the transition law, `exp(-theta delta)`.
    pub fn ar_coefficient(&self) -> f64 {
        (-self.theta * self.delta).exp()
    }

    /// Conditional variance of `Z_{j+1}` given `Z_j`:
    /// `sigma^2 (1 - a^2) / (2 theta)` with `a` the AR(1) coefficient.
    pub fn transition_variance(&self) -> f64 {
        let a = self.ar_coefficient();
        self.sigma * self.sigma * (1.0 - a * a) / (2.0 * self.theta)
    }

    pub fn drift(&self) -> DriftSpec {
        DriftSpec::ou()
    }
}

/// Compact parameter space `[lo, hi]` the estimators search over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterInterval {
    lo: f64,
    hi: f64,
}

impl ParameterInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "parameter interval requires lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(ParameterInterval { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo && theta <= self.hi
    }

    pub fn is_interior(&self, theta: f64) -> bool {
        theta > self.lo && theta < self.hi
    }

    pub fn clamp(&self, theta: f64) -> f64 {
        theta.clamp(self.lo, self.hi)
    }
}

impl Default for ParameterInterval {
    /// Default search interval used by the experiments; generously brackets
    /// the mean-reversion rates considered there.
    fn default() -> Self {
        ParameterInterval { lo: 0.05, hi: 20.0 }
    }
}

/// Residual of the stationary ODE at a single point:
/// `mu(x; theta) pi - (sigma^2 / 2) pi'` for constant dispersion (the
/// bracketed product rule term of the general equation collapses since
/// sigma' == 0).
pub fn stationary_ode_residual(
    x: f64,
    theta: f64,
    pi: f64,
    pi_prime: f64,
    drift: &DriftSpec,
    sigma: f64,
) -> f64 {
    drift.mu(x, theta) * pi - 0.5 * sigma * sigma * pi_prime
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_drift_values() {
        let d = DriftSpec::ou();
        assert_eq!(d.mu(1.0, 2.0), -2.0);
        assert_eq!(d.mu(0.0, 5.0), 0.0);
        assert_eq!(d.dmu_dtheta(3.0, 0.7), -3.0);
        assert_eq!(d.dmu_dtheta(3.0, 11.0), -3.0);
        assert_eq!(d.d2mu_dtheta2(3.0, 1.0), 0.0);
        let lin = d.linear_decomposition().unwrap();
        assert_eq!(lin.m(2.5), -2.5);
        assert_eq!(lin.b(2.5), 0.0);
    }

    #[test]
    fn linear_decomposition_consistent_with_mu() {
        let d = DriftSpec::linear_in_theta(|x| x.sin(), |x| 0.5 * x);
        let lin = d.linear_decomposition().unwrap();
        for i in 0..100 {
            let x = -5.0 + 0.1 * i as f64;
            for theta in [0.3, 1.0, 4.2] {
                let direct = d.mu(x, theta);
                let composed = theta * lin.m(x) + lin.b(x);
                assert!((direct - composed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn theta_derivative_matches_finite_differences() {
        let d = DriftSpec::linear_in_theta(|x| -x * x.cos(), |x| x * x);
        let h = 1e-6;
        for i in 0..20 {
            let x = -2.0 + 0.2 * i as f64;
            let theta = 1.5;
            let fd = (d.mu(x, theta + h) - d.mu(x, theta - h)) / (2.0 * h);
            let an = d.dmu_dtheta(x, theta);
            let scale = an.abs().max(1.0);
            assert!((fd - an).abs() / scale < 1e-6, "x={x}: {fd} vs {an}");
        }
    }

    #[test]
    fn stationary_density_closed_form() {
        let m = OuModel::new(2.0, 1.0, 1.0).unwrap();
        assert!((m.stationary_variance() - 0.25).abs() < 1e-15);
        assert!((m.stationary_density(0.0) - 0.797_884_560_802_865_4).abs() < 1e-15);
        assert_eq!(m.stationary_density_deriv(0.0), 0.0);
    }

    #[test]
    fn stationary_density_integrates_to_one() {
        let m = OuModel::new(2.0, 1.0, 1.0).unwrap();
        let sigma = m.sigma();
        let g = crate::quad::UniformGrid::new(-10.0 * sigma, 10.0 * sigma, 4001).unwrap();
        let mass = g.integrate_simpson(|x| m.stationary_density(x));
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(OuModel::new(0.0, 1.0, 1.0).is_err());
        assert!(OuModel::new(2.0, -1.0, 1.0).is_err());
        assert!(OuModel::new(2.0, 1.0, 0.0).is_err());
        assert!(OuModel::new(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn residual_vanishes_at_true_parameter() {
        let m = OuModel::new(2.0, 1.0, 0.1).unwrap();
        let drift = m.drift();
        for i in 0..100 {
            let x = -3.0 + 0.06 * i as f64;
            let r = stationary_ode_residual(
                x,
                m.theta(),
                m.stationary_density(x),
                m.stationary_density_deriv(x),
                &drift,
                m.sigma(),
            );
            assert!(r.abs() < 1e-12, "x={x}: residual {r}");
        }
    }

    #[test]
    fn residual_at_wrong_theta() {
        // exact density at theta0=2, residual evaluated at theta=3:
        // (-3x + 2x) pi(x) = -x pi(x), so at x=0.5 this is -0.5 pi(0.5)
        let m = OuModel::new(2.0, 1.0, 0.1).unwrap();
        let x = 0.5;
        let r = stationary_ode_residual(
            x,
            3.0,
            m.stationary_density(x),
            m.stationary_density_deriv(x),
            &m.drift(),
            m.sigma(),
        );
        assert!((r - (-0.24197072451914335)).abs() < 1e-15);
    }

    #[test]
    fn residual_zero_density_is_zero() {
        let d = DriftSpec::ou();
        assert_eq!(stationary_ode_residual(1.0, 3.0, 0.0, 0.0, &d, 1.0), 0.0);
    }

    #[test]
    fn interval_contains_and_clamps() {
        let s = ParameterInterval::new(0.5, 2.0).unwrap();
        assert!(s.contains(0.5) && s.contains(2.0));
        assert!(!s.is_interior(0.5) && s.is_interior(1.0));
        assert_eq!(s.clamp(3.0), 2.0);
        assert_eq!(s.clamp(0.1), 0.5);
        assert!(ParameterInterval::new(2.0, 2.0).is_err());
    }
}
