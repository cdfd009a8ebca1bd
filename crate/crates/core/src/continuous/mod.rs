//! The continuous case on `[−R, R]^n`.
//!
//! Integrals use tensor Gauss–Legendre rules. Mutual pressure is computed by
//! reducing each marginal to equal-probability bins represented by their
//! conditional means, then running the discrete dual on the resulting atomic
//! instance; for atomic marginals this reduction is exact.

mod expr;
mod marginal;
mod potential;
mod quadrature;

pub use expr::Expr;
pub use marginal::{
    quantile_sample, AtomicMeasure, DiscreteMarginal, GridDensity, MarginalSpec, QuantileSample,
    MASS_TOLERANCE,
};
pub use potential::{ContinuousPotential, PotentialKind, Table};
pub use quadrature::{gauss_legendre, QuadratureGrid};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{Method, MutualPressureEstimate};
use crate::math::{log_sum_exp, LogSumExp};
use crate::measures::{JointPmf, Masses, Pmf};
use crate::microstates::mc_kernel;
use crate::mutual_pressure::{mutual_pressure_limit, DualityReport};
use crate::pressure::PotentialTensor;

/// Grid points used for Gibbs marginal densities.
pub const GIBBS_DENSITY_POINTS: usize = 1025;

/// A quadrature value with the change from the half-order rule as its error
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub order: usize,
    pub error_estimate: f64,
}

fn pressure_at(h: &ContinuousPotential, order: usize) -> Result<f64> {
    let g = QuadratureGrid::new(order, h.radius())?;
    Ok(g.log_integral_exp(h.dim(), |x| h.eval(x)))
}

/// `P(h) = log ∫ e^{h}` over `[−R, R]^n` with an order-`q` tensor rule.
pub fn quadrature_pressure(h: &ContinuousPotential, order: usize) -> Result<QuadratureEstimate> {
    let value = pressure_at(h, order)?;
    let coarse = pressure_at(h, (order / 2).max(2))?;
    Ok(QuadratureEstimate {
        value,
        order,
        error_estimate: (value - coarse).abs(),
    })
}

fn with_coordinate(y: &[f64], i: usize, x: f64, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend_from_slice(&y[..i]);
    buf.push(x);
    buf.extend_from_slice(&y[i..]);
}

/// `hᵢ(x) = log ∫ e^{h(…, x, …)}` over the other `n − 1` coordinates.
pub fn marginal_potential_at(h: &ContinuousPotential, i: usize, x: f64, order: usize) -> Result<f64> {
    if i >= h.dim() {
        return Err(Error::IndexOutOfRange { index: i, len: h.dim() });
    }
    if h.dim() == 1 {
        return Ok(h.eval(&[x]));
    }
    let g = QuadratureGrid::new(order, h.radius())?;
    Ok(g.log_integral_exp(h.dim() - 1, |y| {
        let mut buf = Vec::with_capacity(y.len() + 1);
        with_coordinate(y, i, x, &mut buf);
        h.eval(&buf)
    }))
}

/// `hᵢ` at the axis nodes of the order-`q` rule (`i` zero-based).
pub fn continuous_marginal_potential(
    h: &ContinuousPotential,
    i: usize,
    order: usize,
) -> Result<Vec<f64>> {
    let g = QuadratureGrid::new(order, h.radius())?;
    g.nodes()
        .iter()
        .map(|&x| marginal_potential_at(h, i, x, order))
        .collect()
}

/// The `i`-th marginal of the Gibbs density `e^{h}/Z_h`, sampled on a
/// `GIBBS_DENSITY_POINTS` grid and normalized.
pub fn gibbs_marginal_density(h: &ContinuousPotential, i: usize, order: usize) -> Result<GridDensity> {
    let r = h.radius();
    let m = GIBBS_DENSITY_POINTS;
    let step = 2.0 * r / (m - 1) as f64;
    let logs = (0..m)
        .map(|k| marginal_potential_at(h, i, -r + step * k as f64, order))
        .collect::<Result<Vec<f64>>>()?;
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    GridDensity::normalized(r, logs.iter().map(|l| (l - top).exp()).collect())
}

/// `H(μᵢ) = log Z_h − μᵢ(hᵢ)` for the `i`-th Gibbs marginal.
pub fn gibbs_marginal_entropy(h: &ContinuousPotential, i: usize, order: usize) -> Result<f64> {
    let g = QuadratureGrid::new(order, h.radius())?;
    let hi = continuous_marginal_potential(h, i, order)?;
    let log_w: Vec<f64> = g.weights().iter().map(|w| w.ln()).collect();
    let terms: Vec<f64> = hi.iter().zip(&log_w).map(|(a, b)| a + b).collect();
    let log_z = log_sum_exp(&terms);
    let mean: f64 = hi
        .iter()
        .zip(&terms)
        .map(|(&v, &t)| (t - log_z).exp() * v)
        .sum();
    Ok(log_z - mean)
}

/// A discrete instance standing in for a continuous one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteInstance {
    pub potential: PotentialTensor<f64>,
    pub marginals: Vec<DiscreteMarginal>,
}

impl DiscreteInstance {
    pub fn pmfs(&self) -> Vec<Pmf<f64>> {
        self.marginals.iter().map(|m| m.pmf.clone()).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.marginals.iter().map(|m| m.points.clone()).collect()
    }
}

fn check_marginals(h: &ContinuousPotential, mus: &[MarginalSpec]) -> Result<()> {
    if mus.len() != h.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{} marginals for dimension {}",
            mus.len(),
            h.dim()
        )));
    }
    let r = h.radius();
    for (i, m) in mus.iter().enumerate() {
        let (lo, hi) = m.extent();
        let mismatched = match m {
            MarginalSpec::Grid(g) => (g.radius() - r).abs() > 1e-12 * r,
            MarginalSpec::Atomic(_) => lo < -r || hi > r,
        };
        if mismatched {
            return Err(Error::InvalidMeasure(format!(
                "marginal {i} does not live on [-{r}, {r}]"
            )));
        }
    }
    Ok(())
}

/// Reduces `(h, μ₁, …, μₙ)` to `d` levels per marginal (see
/// [`MarginalSpec::discretize`]); `h` is evaluated at representative tuples.
pub fn discretize(h: &ContinuousPotential, mus: &[MarginalSpec], d: usize) -> Result<DiscreteInstance> {
    discretize_levels(h, mus, &vec![d; mus.len()])
}

/// [`discretize`] with a level count per marginal.
pub fn discretize_levels(
    h: &ContinuousPotential,
    mus: &[MarginalSpec],
    levels: &[usize],
) -> Result<DiscreteInstance> {
    check_marginals(h, mus)?;
    if levels.len() != mus.len() {
        return Err(Error::ShapeMismatch("one level count per marginal".into()));
    }
    let marginals = mus
        .iter()
        .zip(levels)
        .map(|(m, &d)| m.discretize(d))
        .collect::<Result<Vec<_>>>()?;
    let shape: Vec<usize> = marginals.iter().map(|m| m.points.len()).collect();
    let mut x = vec![0.0; shape.len()];
    let potential = PotentialTensor::from_fn(&shape, |w| {
        for (k, &t) in w.iter().enumerate() {
            x[k] = marginals[k].points[t];
        }
        h.eval(&x)
    })?;
    Ok(DiscreteInstance {
        potential,
        marginals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub levels: usize,
    pub value: f64,
}

/// Continuous mutual pressure with its refinement trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousMutualPressure {
    pub estimate: MutualPressureEstimate<f64>,
    /// Values at `d`, `2d`, `4d` levels.
    pub trace: Vec<TracePoint>,
    /// `|v_{4d} − v_{2d}|`.
    pub error_proxy: f64,
    /// Whether the increments shrink.
    pub cauchy: bool,
}

/// `P_sym(h : μ₁, …, μₙ)` through [`discretize`] at `d`, `2d` and `4d`
/// levels; the finest value is reported. Atomic marginals are never split
/// into more levels than they have atoms.
pub fn continuous_mutual_pressure(
    h: &ContinuousPotential,
    mus: &[MarginalSpec],
    d: usize,
    tol: f64,
) -> Result<ContinuousMutualPressure> {
    check_marginals(h, mus)?;
    let mut trace = Vec::with_capacity(3);
    let mut last = None;
    for factor in [1, 2, 4] {
        let levels: Vec<usize> = mus
            .iter()
            .map(|m| match m.atom_count() {
                Some(a) => (d * factor).min(a),
                None => d * factor,
            })
            .collect();
        let est = if let Some(c) = h.constant_value() {
            let mut e = MutualPressureEstimate::bare(c, Method::LimitDual);
            e.iterations = Some(0);
            e.marginal_residual = Some(0.0);
            e
        } else {
            let inst = discretize_levels(h, mus, &levels)?;
            mutual_pressure_limit(&inst.potential, &inst.pmfs(), tol)?
        };
        trace.push(TracePoint {
            levels: d * factor,
            value: est.value,
        });
        last = Some(est);
    }
    let inc1 = (trace[1].value - trace[0].value).abs();
    let inc2 = (trace[2].value - trace[1].value).abs();
    Ok(ContinuousMutualPressure {
        estimate: last.expect("three refinements"),
        trace,
        error_proxy: inc2,
        cauchy: inc2 <= inc1 + 1e-12,
    })
}

/// Monte Carlo finite-`N` mutual pressure on real quantile samples, with the
/// estimator and random stream of [`crate::microstates::mc_value`].
pub fn mc_value_continuous(
    h: &ContinuousPotential,
    xis: &[QuantileSample],
    draws: usize,
    seed: u64,
) -> Result<MutualPressureEstimate<f64>> {
    if xis.len() != h.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples for dimension {}",
            xis.len(),
            h.dim()
        )));
    }
    let n = xis[0].len();
    if xis.iter().any(|x| x.len() != n) {
        return Err(Error::InconsistentMargins("samples of different lengths".into()));
    }
    if xis.len() == 1 {
        let k = xis[0].values().iter().map(|&x| h.eval(&[x])).sum::<f64>() / n as f64;
        let mut est = MutualPressureEstimate::bare(k, Method::MonteCarlo);
        est.sample_size = Some(n);
        est.std_error = Some(0.0);
        est.mc_samples = Some(draws);
        return Ok(est);
    }
    let mut x = vec![0.0; xis.len()];
    mc_kernel(xis.len(), n, draws, seed, |perms| {
        let mut acc = 0.0;
        for j in 0..n {
            for (i, p) in perms.iter().enumerate() {
                x[i] = xis[i].values()[p[j]];
            }
            acc += h.eval(&x);
        }
        acc
    })
}

/// `P(h)` against `P_sym(h : μ₁, …, μₙ) + Σ H(μᵢ)` for the Gibbs marginals
/// of `h`.
///
/// `P` and the entropies use the order-`q` rule; the marginals enter the
/// mutual pressure as fine grid densities reduced to `d`, `2d`, `4d` levels.
/// `marginal_distances` measures, in total variation, how far those grid
/// densities are from the quadrature marginals.
pub fn continuous_duality_check(
    h: &ContinuousPotential,
    order: usize,
    d: usize,
) -> Result<DualityReport<f64>> {
    let n = h.dim();
    if let Some(c) = h.constant_value() {
        // Uniform Gibbs marginals: every term is known in closed form.
        QuadratureGrid::new(order, h.radius())?;
        let entropy_sum = n as f64 * (2.0 * h.radius()).ln();
        return Ok(DualityReport {
            pressure: c + entropy_sum,
            mutual_pressure: c,
            entropy_sum,
            gap: 0.0,
            marginal_distances: vec![0.0; n],
        });
    }
    let p = quadrature_pressure(h, order)?.value;
    let g = QuadratureGrid::new(order, h.radius())?;
    let mut mus = Vec::with_capacity(n);
    let mut entropy_sum = 0.0;
    let mut marginal_distances = Vec::with_capacity(n);
    for i in 0..n {
        let dens = gibbs_marginal_density(h, i, order)?;
        let hi = continuous_marginal_potential(h, i, order)?;
        let tv = 0.5
            * g.nodes()
                .iter()
                .zip(g.weights())
                .zip(&hi)
                .map(|((&x, &w), &v)| w * (dens.density(x) - (v - p).exp()).abs())
                .sum::<f64>();
        marginal_distances.push(tv);
        entropy_sum += gibbs_marginal_entropy(h, i, order)?;
        mus.push(MarginalSpec::Grid(dens));
    }
    let p_sym = continuous_mutual_pressure(h, &mus, d, crate::mutual_pressure::default_tol())?
        .estimate
        .value;
    Ok(DualityReport {
        pressure: p,
        mutual_pressure: p_sym,
        entropy_sum,
        gap: p - p_sym - entropy_sum,
        marginal_distances,
    })
}

/// [`continuous_duality_check`] for arbitrary grid-density marginals, whose
/// entropies are `−∫ p log p`. The gap is nonnegative up to discretization
/// error and vanishes only at the Gibbs marginals.
pub fn continuous_duality_report(
    h: &ContinuousPotential,
    mus: &[MarginalSpec],
    order: usize,
    d: usize,
) -> Result<DualityReport<f64>> {
    check_marginals(h, mus)?;
    let p = quadrature_pressure(h, order)?.value;
    let mut entropy_sum = 0.0;
    let mut marginal_distances = Vec::with_capacity(mus.len());
    let g = QuadratureGrid::new(order, h.radius())?;
    for (i, m) in mus.iter().enumerate() {
        let MarginalSpec::Grid(dens) = m else {
            return Err(Error::InvalidMeasure(format!(
                "marginal {i} is atomic and has no differential entropy"
            )));
        };
        entropy_sum += dens.differential_entropy();
        let hi = continuous_marginal_potential(h, i, order)?;
        let tv = 0.5
            * g.nodes()
                .iter()
                .zip(g.weights())
                .zip(&hi)
                .map(|((&x, &w), &v)| w * (dens.density(x) - (v - p).exp()).abs())
                .sum::<f64>();
        marginal_distances.push(tv);
    }
    let p_sym = continuous_mutual_pressure(h, mus, d, crate::mutual_pressure::default_tol())?
        .estimate
        .value;
    Ok(DualityReport {
        pressure: p,
        mutual_pressure: p_sym,
        entropy_sum,
        gap: p - p_sym - entropy_sum,
        marginal_distances,
    })
}

/// `log Σ e^{h(t̂)}` over all tuples of atoms: the pressure of `h` against
/// counting measure on the embedded points.
pub fn atomic_pressure(h: &ContinuousPotential, points: &[Vec<f64>]) -> Result<f64> {
    if points.len() != h.dim() || points.iter().any(Vec::is_empty) {
        return Err(Error::ShapeMismatch("one nonempty point set per coordinate".into()));
    }
    let shape: Vec<usize> = points.iter().map(Vec::len).collect();
    let mut idx = vec![0; shape.len()];
    let mut x = vec![0.0; shape.len()];
    let mut acc = LogSumExp::new();
    loop {
        for (k, &i) in idx.iter().enumerate() {
            x[k] = points[k][i];
        }
        acc.push(h.eval(&x));
        let mut k = shape.len();
        loop {
            if k == 0 {
                return Ok(acc.value());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// A joint atomic measure on a product of embedded point sets.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicJoint {
    points: Vec<Vec<f64>>,
    masses: JointPmf<f64>,
}

impl AtomicJoint {
    pub fn new(points: Vec<Vec<f64>>, masses: JointPmf<f64>) -> Result<Self> {
        let shape: Vec<usize> = points.iter().map(Vec::len).collect();
        if shape != masses.shape() {
            return Err(Error::ShapeMismatch(format!(
                "points {shape:?} vs masses {:?}",
                masses.shape()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMeasure(format!("axis {i} points must increase")));
            }
        }
        Ok(AtomicJoint { points, masses })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// `𝓘_sym = Σ μ(t̂) log(μ(t̂) / Π μᵢ(t̂ᵢ))`, summed over atoms.
    pub fn i_sym(&self) -> f64 {
        let w = self.masses.weights();
        let shape = w.shape().to_vec();
        let mut marg: Vec<Vec<f64>> = shape.iter().map(|&d| vec![0.0; d]).collect();
        for (idx, &m) in w.indexed_iter() {
            for (i, v) in marg.iter_mut().enumerate() {
                v[idx[i]] += m;
            }
        }
        let mut acc = 0.0;
        for (idx, &m) in w.indexed_iter() {
            if m > 0.0 {
                let prod: f64 = (0..shape.len()).map(|i| marg[i][idx[i]]).product();
                acc += m * (m / prod).ln();
            }
        }
        acc.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, LN_2};

    fn xy() -> ContinuousPotential {
        ContinuousPotential::new(1.0, 2, PotentialKind::Product { beta: 1.0 }).unwrap()
    }

    #[test]
    fn pressure_examples() {
        let z1 = ContinuousPotential::new(1.0, 1, PotentialKind::Zero).unwrap();
        assert!((quadrature_pressure(&z1, 4).unwrap().value - LN_2).abs() < 1e-14);
        let z2 = ContinuousPotential::new(1.0, 2, PotentialKind::Zero).unwrap();
        assert!((quadrature_pressure(&z2, 7).unwrap().value - 4f64.ln()).abs() < 1e-14);
        let x = ContinuousPotential::expr(1.0, 1, "x").unwrap();
        let q = quadrature_pressure(&x, 32).unwrap();
        assert!((q.value - (E - 1.0 / E).ln()).abs() < 1e-14);
        assert!(q.error_estimate < 1e-12);
    }

    #[test]
    fn marginal_potential_examples() {
        let h = xy();
        let nodes = QuadratureGrid::new(24, 1.0).unwrap();
        let h1 = continuous_marginal_potential(&h, 0, 24).unwrap();
        for (x, v) in nodes.nodes().iter().zip(&h1) {
            let exact = (2.0 * x.sinh() / x).ln();
            assert!((v - exact).abs() < 1e-13, "x={x}");
        }
        assert!((marginal_potential_at(&h, 1, 0.0, 24).unwrap() - LN_2).abs() < 1e-14);

        let z = ContinuousPotential::new(1.0, 3, PotentialKind::Zero).unwrap();
        for v in continuous_marginal_potential(&z, 2, 6).unwrap() {
            assert!((v - 2.0 * LN_2).abs() < 1e-14);
        }
        assert!(continuous_marginal_potential(&z, 3, 6).is_err());

        let sep = ContinuousPotential::expr(1.0, 2, "x^2 + 2*y").unwrap();
        let inner = ((E * E - 1.0 / (E * E)) / 2.0).ln();
        assert!((marginal_potential_at(&sep, 0, 0.3, 20).unwrap() - (0.09 + inner)).abs() < 1e-13);
    }

    #[test]
    fn constant_potential_is_constant_at_every_level() {
        let c = ContinuousPotential::new(1.0, 2, PotentialKind::Constant(0.4)).unwrap();
        let u = MarginalSpec::uniform(1.0).unwrap();
        let r = continuous_mutual_pressure(&c, &[u.clone(), u], 4, 1e-12).unwrap();
        assert!(r.trace.iter().all(|t| t.value == 0.4));
    }

    #[test]
    fn one_dimensional_pressure_is_an_expectation() {
        let h = ContinuousPotential::expr(1.0, 1, "x^2").unwrap();
        let u = MarginalSpec::uniform(1.0).unwrap();
        let r = continuous_mutual_pressure(&h, &[u], 64, 1e-12).unwrap();
        assert!((r.estimate.value - 1.0 / 3.0).abs() < 1e-4);
        assert!(r.cauchy);
    }

    #[test]
    fn mc_continuous_examples() {
        let z = ContinuousPotential::new(1.0, 2, PotentialKind::Zero).unwrap();
        let u = MarginalSpec::uniform(1.0).unwrap();
        let xi = quantile_sample(&u, 6).unwrap();
        assert_eq!(mc_value_continuous(&z, &[xi.clone(), xi.clone()], 50, 1).unwrap().value, 0.0);

        let h = ContinuousPotential::expr(1.0, 1, "x^3 + 1").unwrap();
        let v = mc_value_continuous(&h, std::slice::from_ref(&xi), 50, 1).unwrap().value;
        assert!((v - xi.values().iter().map(|x| x.powi(3) + 1.0).sum::<f64>() / 6.0).abs() < 1e-15);
    }

    #[test]
    fn zero_potential_duality_gap_vanishes() {
        let z = ContinuousPotential::new(1.5, 2, PotentialKind::Zero).unwrap();
        let r = continuous_duality_check(&z, 8, 4).unwrap();
        assert!(r.gap.abs() < 1e-12, "{}", r.gap);
        assert!((r.entropy_sum - 2.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn atomic_joint_i_sym() {
        let mu = JointPmf::from_tensor(ndarray::array![[0.4, 0.1], [0.1, 0.4]].into_dyn()).unwrap();
        let a = AtomicJoint::new(vec![vec![-1.0, 1.0], vec![-0.5, 0.5]], mu.clone()).unwrap();
        assert!((a.i_sym() - crate::measures::mutual_information(&mu)).abs() < 1e-15);
    }
}
