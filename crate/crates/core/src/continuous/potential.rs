//! Continuous potentials on `[−R, R]^n`.

use ndarray::ArrayD;
use serde::Serialize;

use super::expr::Expr;
use super::quadrature::QuadratureGrid;
use crate::error::{Error, Result};
use crate::pressure::PotentialTensor;

/// Values on a tensor grid of points, extended by multilinear interpolation
/// and held constant outside the outermost points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    shape: Vec<usize>,
}

impl Table {
    pub fn new(points: Vec<Vec<f64>>, values: ArrayD<f64>) -> Result<Self> {
        let shape: Vec<usize> = points.iter().map(Vec::len).collect();
        if values.shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "table values {:?} vs points {:?}",
                values.shape(),
                shape
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.is_empty() || p.iter().any(|x| !x.is_finite()) || p.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidPotential(format!(
                    "axis {i} points must be finite and strictly increasing"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential("non-finite table value".into()));
        }
        Ok(Table {
            points,
            values: values.as_standard_layout().iter().copied().collect(),
            shape,
        })
    }

    /// The continuous extension of a discrete potential placed at `points`.
    pub fn from_potential(points: Vec<Vec<f64>>, h: &PotentialTensor<f64>) -> Result<Self> {
        Self::new(points, h.values().clone())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.points.len();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for i in 0..n {
            let p = &self.points[i];
            if p.len() == 1 {
                continue;
            }
            let xi = x[i].clamp(p[0], p[p.len() - 1]);
            let k = p.partition_point(|&t| t <= xi).saturating_sub(1).min(p.len() - 2);
            base[i] = k;
            frac[i] = (xi - p[k]) / (p[k + 1] - p[k]);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut flat = 0;
            for i in 0..n {
                let up = (corner >> i) & 1 == 1;
                if up && self.shape[i] == 1 {
                    w = 0.0;
                    break;
                }
                w *= if up { frac[i] } else { 1.0 - frac[i] };
                flat = flat * self.shape[i] + base[i] + usize::from(up);
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }

    fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Built-in potentials and the expression escape hatch.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Zero,
    Constant(f64),
    /// `β · x₁ x₂ ⋯ xₙ`.
    Product { beta: f64 },
    /// `−a Σ xᵢ²`.
    Gaussian { a: f64 },
    /// `Σ cᵢ xᵢ`.
    Linear { coefficients: Vec<f64> },
    Expr(Expr),
    Table(Table),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousPotential {
    radius: f64,
    dim: usize,
    kind: PotentialKind,
    bound: Option<f64>,
}

impl ContinuousPotential {
    pub fn new(radius: f64, dim: usize, kind: PotentialKind) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidPotential(format!("radius must be positive, got {radius}")));
        }
        if dim == 0 {
            return Err(Error::InvalidPotential("dimension must be at least 1".into()));
        }
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidPotential(format!("{what} must be finite")))
            }
        };
        match &kind {
            PotentialKind::Zero => {}
            PotentialKind::Constant(c) => finite(*c, "constant")?,
            PotentialKind::Product { beta } => finite(*beta, "beta")?,
            PotentialKind::Gaussian { a } => finite(*a, "a")?,
            PotentialKind::Linear { coefficients } => {
                if coefficients.len() != dim {
                    return Err(Error::ShapeMismatch(format!(
                        "{} coefficients for dimension {dim}",
                        coefficients.len()
                    )));
                }
                for &c in coefficients {
                    finite(c, "coefficient")?;
                }
            }
            PotentialKind::Expr(e) => {
                if e.arity() > dim {
                    return Err(Error::Expression(format!(
                        "expression uses coordinate {} in dimension {dim}",
                        e.arity()
                    )));
                }
            }
            PotentialKind::Table(t) => {
                if t.dim() != dim {
                    return Err(Error::ShapeMismatch(format!(
                        "table of dimension {} for dimension {dim}",
                        t.dim()
                    )));
                }
                let outside = t
                    .points
                    .iter()
                    .flatten()
                    .any(|&p| p < -radius || p > radius);
                if outside {
                    return Err(Error::InvalidPotential(format!(
                        "table points outside [-{radius}, {radius}]"
                    )));
                }
            }
        }
        Ok(ContinuousPotential {
            radius,
            dim,
            kind,
            bound: None,
        })
    }

    /// Parses `src` with the expression grammar.
    pub fn expr(radius: f64, dim: usize, src: &str) -> Result<Self> {
        Self::new(radius, dim, PotentialKind::Expr(Expr::parse(src)?))
    }

    /// Declares a sup-norm bound, spot-checked by [`check_bound`](Self::check_bound).
    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) {
            return Err(Error::InvalidPotential(format!("bound must be nonnegative, got {bound}")));
        }
        self.bound = Some(bound);
        Ok(self)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn declared_bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant(c) => *c,
            PotentialKind::Product { beta } => beta * x.iter().product::<f64>(),
            PotentialKind::Gaussian { a } => -a * x.iter().map(|v| v * v).sum::<f64>(),
            PotentialKind::Linear { coefficients } => {
                coefficients.iter().zip(x).map(|(c, v)| c * v).sum()
            }
            PotentialKind::Expr(e) => e.eval(x),
            PotentialKind::Table(t) => t.eval(x),
        }
    }

    /// `Some(c)` when the potential is identically `c`.
    pub fn constant_value(&self) -> Option<f64> {
        match &self.kind {
            PotentialKind::Zero => Some(0.0),
            PotentialKind::Constant(c) => Some(*c),
            PotentialKind::Product { beta } | PotentialKind::Gaussian { a: beta } if *beta == 0.0 => Some(0.0),
            PotentialKind::Linear { coefficients } if coefficients.iter().all(|&c| c == 0.0) => Some(0.0),
            PotentialKind::Expr(e) if e.arity() == 0 => Some(e.eval(&[])),
            _ => None,
        }
    }

    /// An upper bound on `sup |h|`: the declared one, a closed form for the
    /// catalog, or the largest value seen on a quadrature grid.
    pub fn sup_bound(&self) -> f64 {
        if let Some(b) = self.bound {
            return b;
        }
        let r = self.radius;
        let n = self.dim as i32;
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant(c) => c.abs(),
            PotentialKind::Product { beta } => beta.abs() * r.powi(n),
            PotentialKind::Gaussian { a } => a.abs() * f64::from(n) * r * r,
            PotentialKind::Linear { coefficients } => coefficients.iter().map(|c| c.abs() * r).sum(),
            PotentialKind::Table(t) => t.sup_norm(),
            PotentialKind::Expr(_) => self.grid_max(16),
        }
    }

    fn grid_max(&self, order: usize) -> f64 {
        let g = QuadratureGrid::new(order, self.radius).expect("valid grid");
        // Include the corners, where polynomial potentials peak.
        let mut axis: Vec<f64> = g.nodes().to_vec();
        axis.push(-self.radius);
        axis.push(self.radius);
        let q = axis.len();
        let mut idx = vec![0; self.dim];
        let mut x = vec![0.0; self.dim];
        let mut best: f64 = 0.0;
        loop {
            for (k, &i) in idx.iter().enumerate() {
                x[k] = axis[i];
            }
            best = best.max(self.eval(&x).abs());
            let mut k = self.dim;
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < q {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Verifies the declared bound on the order-`q` grid plus the corners.
    pub fn check_bound(&self, order: usize) -> Result<()> {
        let Some(b) = self.bound else {
            return Ok(());
        };
        let seen = self.grid_max(order);
        if seen > b * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::InvalidPotential(format!(
                "|h| reaches {seen} above the declared bound {b}"
            )));
        }
        Ok(())
    }
}
