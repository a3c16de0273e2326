//! Composite quadrature on uniform grids.
//!
//! All weighted integrals in the matching step run over a fixed uniform
//! grid spanning the weight-function support, so the building blocks here
//! are deliberately simple: a uniform grid type plus composite trapezoid
//! and Simpson rules.

use crate::error::{Error, Result};

/// Uniform grid of `nodes` points on `[lo, hi]`, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    lo: f64,
    hi: f64,
    nodes: usize,
}

impl UniformGrid {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("invalid grid range [{lo}, {hi}]")));
        }
        if nodes < 2 {
            return Err(Error::Config(format!("grid needs >= 2 nodes, got {nodes}")));
        }
        Ok(UniformGrid { lo, hi, nodes })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.nodes - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.nodes).map(|i| self.lo + i as f64 * h).collect()
    }

    /// Trapezoid quadrature weight of node `i`.
    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        let h = self.step();
        if i == 0 || i == self.nodes - 1 {
            0.5 * h
        } else {
            h
        }
    }

    pub fn integrate_trapezoid(&self, f: impl Fn(f64) -> f64) -> f64 {
        let h = self.step();
        let mut acc = 0.5 * (f(self.lo) + f(self.hi));
        for i in 1..self.nodes - 1 {
            acc += f(self.lo + i as f64 * h);
        }
        acc * h
    }

    /// Composite Simpson rule; requires an odd node count.
    pub fn integrate_simpson(&self, f: impl Fn(f64) -> f64) -> f64 {
        assert!(
            self.nodes >= 3 && self.nodes % 2 == 1,
            "Simpson rule needs an odd node count >= 3"
        );
        let h = self.step();
        let mut acc = f(self.lo) + f(self.hi);
        for i in 1..self.nodes - 1 {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(self.lo + i as f64 * h);
        }
        acc * h / 3.0
    }
}

/// Trapezoid rule over tabulated values with spacing `step`.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    assert!(values.len() >= 2);
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    (inner + 0.5 * (values[0] + values[values.len() - 1])) * step
}
