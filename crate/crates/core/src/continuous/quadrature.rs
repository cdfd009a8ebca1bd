//! Gauss–Legendre rules on `[−R, R]` and their tensor products.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::LogSumExp;

/// Per-axis Gauss–Legendre nodes and weights on `[−R, R]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    radius: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(order: usize, radius: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!("quadrature order {order} < 2")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        let (x, w) = gauss_legendre(order);
        Ok(QuadratureGrid {
            radius,
            nodes: x.iter().map(|&t| radius * t).collect(),
            weights: w.iter().map(|&t| radius * t).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `log ∫ e^{f}` over `[−R, R]^dim`, summing over the tensor grid.
    ///
    /// The first axis is split across threads; partial sums are merged in
    /// node order so the result does not depend on the thread count.
    pub fn log_integral_exp(&self, dim: usize, f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        if dim == 0 {
            return f(&[]);
        }
        let q = self.order();
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        let partials: Vec<LogSumExp<f64>> = (0..q)
            .into_par_iter()
            .map(|first| {
                let mut acc = LogSumExp::new();
                let mut idx = vec![0usize; dim];
                idx[0] = first;
                let mut x = vec![0.0; dim];
                loop {
                    let mut lw = 0.0;
                    for (k, &i) in idx.iter().enumerate() {
                        x[k] = self.nodes[i];
                        lw += log_w[i];
                    }
                    acc.push(f(&x) + lw);
                    let mut k = dim;
                    loop {
                        if k == 1 {
                            return acc;
                        }
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < q {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
            })
            .collect();
        let mut acc = LogSumExp::new();
        for p in &partials {
            acc.merge(p);
        }
        acc.value()
    }

    /// `∫ f` over `[−R, R]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Nodes and weights on `[−1, 1]`, by Newton iteration on `P_q`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(q, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(q, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[q - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[q - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_q(z), P_q'(z))` by the three-term recurrence.
fn legendre(q: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=q {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
