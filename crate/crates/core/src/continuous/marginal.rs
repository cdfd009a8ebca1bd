//! One-dimensional marginals on `[−R, R]`: piecewise-linear densities and
//! atomic measures.

use serde::Serialize;

use super::quadrature::gauss_legendre;
use crate::error::{Error, Result};
use crate::measures::Pmf;

/// Allowed deviation of total mass from 1.
pub const MASS_TOLERANCE: f64 = 1e-8;
// Slack when comparing cumulative sums against quantile levels.
const LEVEL_SLACK: f64 = 1e-12;

/// A density given at `m ≥ 2` equally spaced points from `−R` to `R`,
/// linear in between.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDensity {
    radius: f64,
    values: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl GridDensity {
    pub fn new(radius: f64, values: Vec<f64>) -> Result<Self> {
        let g = Self::unnormalized(radius, values)?;
        let total = g.cdf[g.cdf.len() - 1];
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("density integrates to {total}, not 1")));
        }
        Ok(g)
    }

    /// Rescales `values` to unit mass.
    pub fn normalized(radius: f64, values: Vec<f64>) -> Result<Self> {
        let g = Self::unnormalized(radius, values)?;
        let total = g.cdf[g.cdf.len() - 1];
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("density has zero mass".into()));
        }
        Self::unnormalized(radius, g.values.iter().map(|v| v / total).collect())
    }

    pub fn uniform(radius: f64) -> Result<Self> {
        Self::new(radius, vec![0.5 / radius; 2])
    }

    /// Samples `f` at `m` equally spaced points and normalizes.
    pub fn from_fn(radius: f64, m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidMeasure("need at least 2 grid points".into()));
        }
        let step = 2.0 * radius / (m - 1) as f64;
        Self::normalized(radius, (0..m).map(|k| f(-radius + step * k as f64)).collect())
    }

    fn unnormalized(radius: f64, values: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidMeasure(format!("radius must be positive, got {radius}")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidMeasure("need at least 2 grid points".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("density value {bad}")));
        }
        let step = 2.0 * radius / (values.len() - 1) as f64;
        let mut cdf = Vec::with_capacity(values.len());
        cdf.push(0.0);
        for w in values.windows(2) {
            let last = cdf[cdf.len() - 1];
            cdf.push(last + 0.5 * step * (w[0] + w[1]));
        }
        Ok(GridDensity { radius, values, cdf })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn step(&self) -> f64 {
        2.0 * self.radius / (self.values.len() - 1) as f64
    }

    fn knot(&self, k: usize) -> f64 {
        -self.radius + self.step() * k as f64
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < -self.radius || x > self.radius {
            return 0.0;
        }
        let m = self.values.len();
        let k = (((x + self.radius) / self.step()) as usize).min(m - 2);
        let u = (x - self.knot(k)) / self.step();
        self.values[k] * (1.0 - u) + self.values[k + 1] * u
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -self.radius {
            return 0.0;
        }
        if x >= self.radius {
            return self.cdf[self.cdf.len() - 1];
        }
        let k = (((x + self.radius) / self.step()) as usize).min(self.values.len() - 2);
        let u = x - self.knot(k);
        let slope = (self.values[k + 1] - self.values[k]) / self.step();
        self.cdf[k] + self.values[k] * u + 0.5 * slope * u * u
    }

    /// `inf { x : F(x) ≥ p }`, solving the quadratic on the relevant segment.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return -self.radius;
        }
        let last = self.cdf.len() - 1;
        let k = self.cdf[1..].partition_point(|&c| c < p).min(last - 1);
        let a = self.values[k];
        let slope = (self.values[k + 1] - self.values[k]) / self.step();
        let delta = (p - self.cdf[k]).max(0.0);
        // u solves a·u + slope·u²/2 = delta; this form avoids cancellation.
        let disc = (a * a + 2.0 * slope * delta).max(0.0);
        let denom = a + disc.sqrt();
        let u = if denom > 0.0 { 2.0 * delta / denom } else { 0.0 };
        (self.knot(k) + u.min(self.step())).min(self.radius)
    }

    /// `∫_lo^hi x^k p(x) dx`, exact for the piecewise-linear density.
    pub fn partial_moment(&self, k: u32, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(-self.radius);
        let hi = hi.min(self.radius);
        if hi <= lo {
            return 0.0;
        }
        let (gx, gw) = gauss_legendre(k as usize / 2 + 2);
        let step = self.step();
        let first = (((lo + self.radius) / step) as usize).min(self.values.len() - 2);
        let mut acc = 0.0;
        let mut seg = first;
        while seg + 1 < self.values.len() {
            let a = self.knot(seg).max(lo);
            let b = self.knot(seg + 1).min(hi);
            if a >= hi {
                break;
            }
            if b > a {
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                for (t, w) in gx.iter().zip(&gw) {
                    let x = mid + half * t;
                    acc += half * w * x.powi(k as i32) * self.density(x);
                }
            }
            seg += 1;
        }
        acc
    }

    pub fn moment(&self, k: u32) -> f64 {
        self.partial_moment(k, -self.radius, self.radius)
    }

    /// `−∫ p log p`, by Gauss–Legendre on every segment.
    pub fn differential_entropy(&self) -> f64 {
        let (gx, gw) = gauss_legendre(16);
        let step = self.step();
        let mut acc = 0.0;
        for seg in 0..self.values.len() - 1 {
            let mid = self.knot(seg) + 0.5 * step;
            for (t, w) in gx.iter().zip(&gw) {
                let p = self.density(mid + 0.5 * step * t);
                if p > 0.0 {
                    acc -= 0.5 * step * w * p * p.ln();
                }
            }
        }
        acc
    }
}

/// `Σ massesⱼ δ_{pointsⱼ}` with strictly increasing points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicMeasure {
    points: Vec<f64>,
    masses: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != masses.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points with {} masses",
                points.len(),
                masses.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure("atoms must be finite and strictly increasing".into()));
        }
        if let Some(bad) = masses.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("atom mass {bad}")));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("atom masses sum to {total}, not 1")));
        }
        Ok(AtomicMeasure { points, masses })
    }

    /// The hat-embedding of a pmf at the given points.
    pub fn embed(points: Vec<f64>, pmf: &Pmf<f64>) -> Result<Self> {
        Self::new(points, pmf.weights().to_vec())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn quantile(&self, p: f64) -> f64 {
        let mut cum = 0.0;
        for (x, m) in self.points.iter().zip(&self.masses) {
            cum += m;
            if cum >= p - LEVEL_SLACK && *m > 0.0 {
                return *x;
            }
        }
        // Rounding left p just above the total mass.
        let last = self.masses.iter().rposition(|&m| m > 0.0).unwrap_or(0);
        self.points[last]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalSpec {
    Grid(GridDensity),
    Atomic(AtomicMeasure),
}

/// A sorted sample `ξ(N)` in `[−R, R]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileSample {
    values: Vec<f64>,
}

impl QuantileSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        if values.iter().any(|x| !x.is_finite()) || values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("sample must be finite and nondecreasing".into()));
        }
        Ok(QuantileSample { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `κ_N(x^k)`.
    pub fn moment(&self, k: u32) -> f64 {
        self.values.iter().map(|x| x.powi(k as i32)).sum::<f64>() / self.values.len() as f64
    }
}

/// One marginal reduced to finitely many points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMarginal {
    pub pmf: Pmf<f64>,
    /// Real location of each symbol.
    pub points: Vec<f64>,
    /// Probability levels delimiting the bins, `0 = c₀ < ... < c_k = 1`.
    pub levels: Vec<f64>,
}

impl MarginalSpec {
    pub fn uniform(radius: f64) -> Result<Self> {
        Ok(MarginalSpec::Grid(GridDensity::uniform(radius)?))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            MarginalSpec::Grid(g) => g.quantile(p),
            MarginalSpec::Atomic(a) => a.quantile(p),
        }
    }

    pub fn moment(&self, k: u32) -> f64 {
        match self {
            MarginalSpec::Grid(g) => g.moment(k),
            MarginalSpec::Atomic(a) => a
                .points
                .iter()
                .zip(&a.masses)
                .map(|(x, m)| m * x.powi(k as i32))
                .sum(),
        }
    }

    /// Smallest and largest point the measure can charge.
    pub fn extent(&self) -> (f64, f64) {
        match self {
            MarginalSpec::Grid(g) => (-g.radius, g.radius),
            MarginalSpec::Atomic(a) => (a.points[0], a.points[a.points.len() - 1]),
        }
    }

    /// `Some(m)` for an atomic measure with `m` atoms.
    pub fn atom_count(&self) -> Option<usize> {
        match self {
            MarginalSpec::Grid(_) => None,
            MarginalSpec::Atomic(a) => Some(a.len()),
        }
    }

    /// Equal-probability bins represented by their conditional means.
    ///
    /// An atomic measure with exactly `d` atoms comes back unchanged. With
    /// fewer levels than atoms, atoms straddling a level are split between
    /// bins, and neighbouring bins that land on the same point are merged.
    pub fn discretize(&self, d: usize) -> Result<DiscreteMarginal> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 levels, got {d}")));
        }
        match self {
            MarginalSpec::Grid(g) => {
                let edges: Vec<f64> = (0..=d)
                    .map(|j| match j {
                        0 => -g.radius,
                        _ if j == d => g.radius,
                        _ => g.quantile(j as f64 / d as f64),
                    })
                    .collect();
                let points: Vec<f64> = edges
                    .windows(2)
                    .map(|e| {
                        let mass = g.cdf(e[1]) - g.cdf(e[0]);
                        (g.partial_moment(1, e[0], e[1]) / mass).clamp(e[0], e[1])
                    })
                    .collect();
                Ok(DiscreteMarginal {
                    pmf: Pmf::from_parts_unchecked(
                        crate::measures::Alphabet::indexed(d),
                        vec![1.0 / d as f64; d],
                    ),
                    points,
                    levels: (0..=d).map(|j| j as f64 / d as f64).collect(),
                })
            }
            MarginalSpec::Atomic(a) => {
                let m = a.len();
                if d > m {
                    return Err(Error::InvalidArgument(format!(
                        "{d} levels for a measure with {m} atoms"
                    )));
                }
                if d == m {
                    let mut levels = vec![0.0];
                    let mut cum = 0.0;
                    for w in &a.masses {
                        cum += w;
                        levels.push(cum);
                    }
                    return Ok(DiscreteMarginal {
                        pmf: Pmf::from_parts_unchecked(
                            crate::measures::Alphabet::indexed(m),
                            a.masses.clone(),
                        ),
                        points: a.points.clone(),
                        levels,
                    });
                }
                Ok(split_atoms(a, d))
            }
        }
    }
}

fn split_atoms(a: &AtomicMeasure, d: usize) -> DiscreteMarginal {
    let mut bounds = vec![0.0];
    let mut cum = 0.0;
    for w in &a.masses {
        cum += w;
        bounds.push(cum);
    }
    let mut points: Vec<f64> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    let mut levels = vec![0.0];
    for j in 0..d {
        let lo = j as f64 / d as f64;
        let hi = (j + 1) as f64 / d as f64;
        let mut contributions = Vec::new();
        for (t, x) in a.points.iter().enumerate() {
            let overlap = bounds[t + 1].min(hi) - bounds[t].max(lo);
            if overlap > 0.0 {
                contributions.push((*x, overlap));
            }
        }
        let rep = match contributions.as_slice() {
            [(x, _)] => *x,
            many => {
                let mass: f64 = many.iter().map(|c| c.1).sum();
                many.iter().map(|(x, w)| x * w).sum::<f64>() / mass
            }
        };
        let bin_mass = 1.0 / d as f64;
        match points.last() {
            Some(&prev) if prev == rep => {
                let k = masses.len() - 1;
                masses[k] += bin_mass;
                levels[k + 1] = hi;
            }
            _ => {
                points.push(rep);
                masses.push(bin_mass);
                levels.push(hi);
            }
        }
    }
    DiscreteMarginal {
        pmf: Pmf::from_parts_unchecked(crate::measures::Alphabet::indexed(points.len()), masses),
        points,
        levels,
    }
}

/// `ξⱼ = F⁻¹((j − ½)/N)`, `j = 1..N`.
pub fn quantile_sample(mu: &MarginalSpec, n: usize) -> Result<QuantileSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let nn = n as f64;
    QuantileSample::new((1..=n).map(|j| mu.quantile((j as f64 - 0.5) / nn)).collect())
}
