//! The limiting mutual pressure through its dual, the entropically
//! regularized multimarginal coupling.
//!
//! `P_sym(h : μ₁, ..., μₙ) = max { μ(h) − S(μ ‖ ⊗μᵢ) : μ has marginals μᵢ }`,
//! and the maximizer has the form `μ*(w) = e^{h(w) + Σ aᵢ(wᵢ)}`. The scaling
//! potentials `aᵢ` are found by log-domain iterative proportional fitting.

use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{Method, MutualPressureEstimate};
use crate::math::LogSumExp;
use crate::measures::{
    marginals, mutual_information, shannon_entropy, tv_distance, JointPmf, Masses, Pmf,
};
use crate::pressure::{gibbs_measure, gibbs_pmf, marginal_potential, pressure, PotentialTensor};
use crate::rng;
use crate::scalar::Scalar;

/// Default number of full IPFP sweeps.
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Steps per ascent run in [`verify_legendre`].
pub const LEGENDRE_STEPS: usize = 500;
// Lower clamp for log-masses in the ascent direction; e^-60 is below any
// tolerance we report.
const LOG_FLOOR: f64 = -60.0;

/// Default marginal tolerance: `1e-12` in `f64`, a few ulps in `f32`.
pub fn default_tol<S: Scalar>() -> S {
    S::lit(1e-12).max(S::epsilon() * S::lit(100.0))
}

/// Result of [`sinkhorn`].
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<S> {
    pub joint: JointPmf<S>,
    /// `bᵢ = aᵢ − log μᵢ` on the support of `μᵢ`, `−∞` off it.
    pub potentials: Vec<Vec<S>>,
    pub iterations: usize,
    /// Largest total-variation error over the marginals.
    pub residual: S,
    /// `log Σ ⊗μ(w) e^{h(w) + Σ bᵢ(wᵢ)} − Σ μᵢ(bᵢ)`.
    pub dual_value: S,
}

fn check_inputs<S: Scalar>(h: &PotentialTensor<S>, mus: &[Pmf<S>]) -> Result<()> {
    if mus.len() != h.arity() {
        return Err(Error::ShapeMismatch(format!(
            "{} marginals for a potential of arity {}",
            mus.len(),
            h.arity()
        )));
    }
    for (i, (mu, &d)) in mus.iter().zip(h.shape().iter()).enumerate() {
        if mu.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "marginal {i} has {} symbols, potential axis has {d}",
                mu.len()
            )));
        }
        if mu.support().is_empty() {
            return Err(Error::EmptySupport(format!("marginal {i}")));
        }
    }
    Ok(())
}

/// Strides of a row-major tensor.
fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Cells of the support sub-tensor: `(reduced multi-index, full flat index)`.
fn support_cells(support: &[Vec<usize>], full_strides: &[usize]) -> Vec<(Vec<usize>, usize)> {
    let shape: Vec<usize> = support.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0; shape.len()];
    for _ in 0..total {
        let flat = idx
            .iter()
            .enumerate()
            .map(|(i, &r)| support[i][r] * full_strides[i])
            .sum();
        out.push((idx.clone(), flat));
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// Log-domain cyclic IPFP for the optimal coupling.
///
/// Zero-mass symbols are removed first and come back with zero mass.
pub fn sinkhorn<S: Scalar>(
    h: &PotentialTensor<S>,
    mus: &[Pmf<S>],
    tol: S,
    max_iter: usize,
) -> Result<Coupling<S>> {
    check_inputs(h, mus)?;
    if !(tol > S::zero()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = mus.len();
    let full_shape = h.shape();
    let support: Vec<Vec<usize>> = mus.iter().map(Pmf::support).collect();
    let cells = support_cells(&support, &strides(&full_shape));
    let hv = h.as_slice();
    let kernel: Vec<S> = cells.iter().map(|(_, flat)| hv[*flat]).collect();
    let log_mu: Vec<Vec<S>> = mus
        .iter()
        .zip(&support)
        .map(|(m, s)| s.iter().map(|&t| m.weights()[t].ln()).collect())
        .collect();
    let target: Vec<Vec<S>> = mus
        .iter()
        .zip(&support)
        .map(|(m, s)| s.iter().map(|&t| m.weights()[t]).collect())
        .collect();

    // bᵢ such that μ*(w) = ⊗μ(w) e^{h(w) + Σ bᵢ(wᵢ)}.
    let mut b: Vec<Vec<S>> = support.iter().map(|s| vec![S::zero(); s.len()]).collect();
    let log_base: Vec<S> = cells
        .iter()
        .zip(&kernel)
        .map(|((r, _), &hw)| hw + (0..n).map(|i| log_mu[i][r[i]]).sum::<S>())
        .collect();
    let log_joint = |b: &[Vec<S>]| -> Vec<S> {
        cells
            .iter()
            .zip(&log_base)
            .map(|((r, _), &x)| x + (0..n).map(|i| b[i][r[i]]).sum::<S>())
            .collect()
    };
    let axis_lse = |lj: &[S], i: usize| -> Vec<S> {
        let mut acc = vec![LogSumExp::new(); support[i].len()];
        for ((r, _), &x) in cells.iter().zip(lj) {
            acc[r[i]].push(x);
        }
        acc.iter().map(LogSumExp::value).collect()
    };

    let mut iterations = 0;
    let mut residual;
    loop {
        let lj = log_joint(&b);
        residual = (0..n)
            .map(|i| {
                let m: Vec<S> = axis_lse(&lj, i).iter().map(|x| x.exp()).collect();
                tv_distance(&m, &target[i])
            })
            .fold(S::zero(), S::max);
        if residual <= tol {
            break;
        }
        if iterations == max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: residual.to_f64_lossy(),
            });
        }
        for i in 0..n {
            let lj = log_joint(&b);
            let marg = axis_lse(&lj, i);
            for (bt, (&l, &lm)) in b[i].iter_mut().zip(marg.iter().zip(&log_mu[i])) {
                *bt += lm - l;
            }
        }
        iterations += 1;
    }

    let lj = log_joint(&b);
    let mut z = LogSumExp::new();
    for &x in &lj {
        z.push(x);
    }
    let dual_value = z.value()
        - (0..n)
            .map(|i| target[i].iter().zip(&b[i]).map(|(&m, &bt)| m * bt).sum::<S>())
            .sum::<S>();

    let mut weights = ArrayD::from_elem(IxDyn(&full_shape), S::zero());
    let flat = weights.as_slice_mut().expect("fresh array is contiguous");
    let log_total = z.value();
    for ((_, f), &x) in cells.iter().zip(&lj) {
        flat[*f] = (x - log_total).exp();
    }
    let mut potentials = Vec::with_capacity(n);
    for (i, s) in support.iter().enumerate() {
        let mut full = vec![S::neg_infinity(); full_shape[i]];
        for (r, &t) in s.iter().enumerate() {
            full[t] = b[i][r];
        }
        potentials.push(full);
    }
    Ok(Coupling {
        joint: JointPmf::from_parts_unchecked(h.alphabets().to_vec(), weights),
        potentials,
        iterations,
        residual,
        dual_value,
    })
}

/// The optimal coupling `μ*` of [`sinkhorn`].
pub fn sinkhorn_coupling<S: Scalar>(
    h: &PotentialTensor<S>,
    mus: &[Pmf<S>],
    tol: S,
    max_iter: usize,
) -> Result<JointPmf<S>> {
    Ok(sinkhorn(h, mus, tol, max_iter)?.joint)
}

/// `P_sym(h : μ₁, ..., μₙ) = μ*(h) + S(μ*) − Σ S(μᵢ)`.
///
/// The value is read off the dual objective at the final potentials, which
/// agrees with the primal expression at the optimum and is stationary there.
/// A constant `h` and `n = 1` are answered in closed form.
pub fn mutual_pressure_limit<S: Scalar>(
    h: &PotentialTensor<S>,
    mus: &[Pmf<S>],
    tol: S,
) -> Result<MutualPressureEstimate<S>> {
    check_inputs(h, mus)?;
    let closed = if let Some(c) = h.constant_value() {
        Some(c)
    } else if mus.len() == 1 {
        Some(mus[0].expect(h.as_slice()))
    } else {
        None
    };
    if let Some(v) = closed {
        let mut est = MutualPressureEstimate::bare(v, Method::LimitDual);
        est.iterations = Some(0);
        est.marginal_residual = Some(S::zero());
        return Ok(est);
    }
    let c = sinkhorn(h, mus, tol, DEFAULT_MAX_ITER)?;
    let mut est = MutualPressureEstimate::bare(c.dual_value, Method::LimitDual);
    est.iterations = Some(c.iterations);
    est.marginal_residual = Some(c.residual);
    Ok(est)
}

/// `μ*(h) + S(μ*) − Σ S(μᵢ)` evaluated on an explicit coupling.
pub fn primal_value<S: Scalar>(h: &PotentialTensor<S>, coupling: &JointPmf<S>) -> S {
    let marg: S = marginals(coupling).iter().map(shannon_entropy).sum();
    coupling.expect(h.values()) + shannon_entropy(coupling) - marg
}

/// `𝓘_sym(μ)`, the mutual information of `μ`.
pub fn i_sym<S: Scalar>(mu: &JointPmf<S>) -> S {
    mutual_information(mu)
}

/// Lower bound on `sup_h { μ(h) − P_sym(h : marginals(μ)) }` by ascent.
///
/// Each run starts from `h = 0` (first trial) or uniform noise in `[−1, 1]`
/// and moves along `log μ − log μ*(h)` with step halving, at most 500 steps.
/// The limit is evaluated through its dual objective, an upper bound for
/// `P_sym`, so the result never exceeds `𝓘_sym(μ)` beyond solver tolerance.
pub fn verify_legendre<S: Scalar>(mu: &JointPmf<S>, trials: usize, seed: u64) -> Result<S> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let mus = marginals(mu);
    let shape = mu.shape();
    let floor = S::lit(LOG_FLOOR);
    let log_mu: Vec<S> = mu
        .weights()
        .iter()
        .map(|&x| if x > S::zero() { x.ln().max(floor) } else { floor })
        .collect();
    let tol = default_tol::<S>();
    let objective = |h: &PotentialTensor<S>| -> Result<(S, JointPmf<S>)> {
        let c = sinkhorn(h, &mus, tol, DEFAULT_MAX_ITER)?;
        Ok((mu.expect(h.values()) - c.dual_value, c.joint))
    };
    let mut rng = rng::stream(seed, "legendre");
    let mut best = S::neg_infinity();
    for trial in 0..trials {
        let mut h = PotentialTensor::from_fn(&shape, |_| {
            if trial == 0 {
                S::zero()
            } else {
                S::lit(rng.random_range(-1.0..=1.0))
            }
        })?;
        let (mut value, mut joint) = objective(&h)?;
        let mut step = S::one();
        for _ in 0..LEGENDRE_STEPS {
            let dir: Vec<S> = log_mu
                .iter()
                .zip(joint.weights().iter())
                .map(|(&lm, &p)| {
                    let lp = if p > S::zero() { p.ln().max(floor) } else { floor };
                    lm - lp
                })
                .collect();
            if dir.iter().all(|d| d.abs() <= S::epsilon()) {
                break;
            }
            let mut improved = false;
            while step > S::lit(1e-12) {
                let flat = h.as_slice();
                let cand = PotentialTensor::new(
                    h.alphabets().to_vec(),
                    ArrayD::from_shape_vec(
                        IxDyn(&shape),
                        flat.iter().zip(&dir).map(|(&x, &d)| x + step * d).collect(),
                    )
                    .expect("shape preserved"),
                )?;
                let (v, j) = objective(&cand)?;
                if v > value {
                    h = cand;
                    value = v;
                    joint = j;
                    improved = true;
                    break;
                }
                step /= S::lit(2.0);
            }
            if !improved {
                break;
            }
            step = (step * S::lit(2.0)).min(S::one());
        }
        best = best.max(value);
    }
    Ok(best)
}

/// Outcome of [`equilibrium_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport<S> {
    pub holds: bool,
    pub i_sym: S,
    /// `μ(h) − P_sym(h : marginals(μ))`.
    pub tilted_value: S,
    /// `|i_sym − tilted_value|`.
    pub equality_defect: S,
    /// TV distance of each marginal of `μ` to the Gibbs measure of `hᵢ`.
    pub marginal_distances: Vec<S>,
}

/// Whether `μ` is mutually equilibrium for `h`: `𝓘_sym(μ) = μ(h) − P_sym`
/// and every marginal `μᵢ` is the Gibbs measure of `hᵢ`, both within `tol`
/// (the second clause in total variation).
pub fn equilibrium_check<S: Scalar>(
    h: &PotentialTensor<S>,
    mu: &JointPmf<S>,
    tol: S,
) -> Result<EquilibriumReport<S>> {
    if h.shape() != mu.shape() {
        return Err(Error::ShapeMismatch(format!(
            "potential {:?} vs measure {:?}",
            h.shape(),
            mu.shape()
        )));
    }
    let mus = marginals(mu);
    let i = i_sym(mu);
    let p_sym = mutual_pressure_limit(h, &mus, default_tol())?.value;
    let tilted_value = mu.expect(h.values()) - p_sym;
    let equality_defect = (i - tilted_value).abs();
    let marginal_distances = mus
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let g = gibbs_pmf(m.alphabet().clone(), &marginal_potential(h, k)?);
            Ok(tv_distance(m.weights(), g.weights()))
        })
        .collect::<Result<Vec<S>>>()?;
    let holds = equality_defect <= tol && marginal_distances.iter().all(|&d| d <= tol);
    Ok(EquilibriumReport {
        holds,
        i_sym: i,
        tilted_value,
        equality_defect,
        marginal_distances,
    })
}

/// `P(h)` against `P_sym(h : μ₁, ..., μₙ) + Σ S(μᵢ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport<S> {
    pub pressure: S,
    pub mutual_pressure: S,
    pub entropy_sum: S,
    /// `pressure − mutual_pressure − entropy_sum`, nonnegative up to solver
    /// tolerance and zero exactly when the `μᵢ` are the Gibbs marginals.
    pub gap: S,
    /// TV distance between each `μᵢ` and the matching marginal of `μ_h`.
    pub marginal_distances: Vec<S>,
}

pub fn duality_report<S: Scalar>(h: &PotentialTensor<S>, mus: &[Pmf<S>]) -> Result<DualityReport<S>> {
    check_inputs(h, mus)?;
    let p = pressure(h);
    let p_sym = mutual_pressure_limit(h, mus, default_tol())?.value;
    let entropy_sum: S = mus.iter().map(shannon_entropy).sum();
    let gibbs = marginals(&gibbs_measure(h));
    let marginal_distances = mus
        .iter()
        .zip(&gibbs)
        .map(|(m, g)| tv_distance(m.weights(), g.weights()))
        .collect();
    Ok(DualityReport {
        pressure: p,
        mutual_pressure: p_sym,
        entropy_sum,
        gap: p - p_sym - entropy_sum,
        marginal_distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::product_measure;
    use ndarray::array;
    use std::f64::consts::{E, LN_2};

    fn pmf(w: &[f64]) -> Pmf<f64> {
        Pmf::from_weights(w.to_vec()).unwrap()
    }

    fn joint(t: ndarray::Array2<f64>) -> JointPmf<f64> {
        JointPmf::from_tensor(t.into_dyn()).unwrap()
    }

    #[test]
    fn flat_kernel_gives_product() {
        let h = PotentialTensor::<f64>::constant(&[2, 3], 0.0);
        let mus = [pmf(&[0.3, 0.7]), pmf(&[0.2, 0.2, 0.6])];
        let c = sinkhorn_coupling(&h, &mus, 1e-12, DEFAULT_MAX_ITER).unwrap();
        let p = product_measure(&mus).unwrap();
        for (a, b) in c.weights().iter().zip(p.weights().iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_coupling_matches_symmetric_family() {
        let h = PotentialTensor::diagonal(2, 2, 1.0);
        let u = pmf(&[0.5, 0.5]);
        let c = sinkhorn_coupling(&h, &[u.clone(), u], 1e-12, DEFAULT_MAX_ITER).unwrap();
        let p = E / (1.0 + E);
        let w = c.weights();
        assert!((w[[0, 0]] - p / 2.0).abs() < 1e-12);
        assert!((w[[0, 1]] - (1.0 - p) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_marginal_coupling_is_the_marginal() {
        let h = PotentialTensor::from_tensor(array![0.4, -2.0, 1.0].into_dyn()).unwrap();
        let m = pmf(&[0.2, 0.5, 0.3]);
        let c = sinkhorn_coupling(&h, &[m.clone()], 1e-12, 100).unwrap();
        for (a, b) in c.weights().iter().zip(m.weights()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_mass_symbols_are_projected_out() {
        let h = PotentialTensor::from_tensor(array![[1.0, 0.0, 2.0], [0.5, -1.0, 0.0]].into_dyn()).unwrap();
        let mus = [pmf(&[0.4, 0.6]), pmf(&[0.5, 0.0, 0.5])];
        let c = sinkhorn(&h, &mus, 1e-12, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(c.joint.weights()[[0, 1]], 0.0);
        assert_eq!(c.joint.weights()[[1, 1]], 0.0);
        assert!(c.residual <= 1e-12);
        assert_eq!(c.potentials[1][1], f64::NEG_INFINITY);
    }

    #[test]
    fn limit_examples() {
        let h = PotentialTensor::diagonal(2, 2, 1.0);
        let u = pmf(&[0.5, 0.5]);
        let v = mutual_pressure_limit(&h, &[u.clone(), u.clone()], 1e-12).unwrap();
        assert!((v.value - ((1.0 + E).ln() - LN_2)).abs() < 1e-12);
        assert!(v.marginal_residual.unwrap() <= 1e-12);

        let c = PotentialTensor::constant(&[2, 2], -0.3);
        assert_eq!(mutual_pressure_limit(&c, &[u.clone(), u.clone()], 1e-12).unwrap().value, -0.3);

        let h1 = PotentialTensor::from_tensor(array![0.4, -2.0].into_dyn()).unwrap();
        let v = mutual_pressure_limit(&h1, &[pmf(&[0.25, 0.75])], 1e-12).unwrap();
        assert!((v.value - (0.1 - 1.5)).abs() < 1e-15);
    }

    #[test]
    fn dual_value_matches_primal_expression() {
        let h = PotentialTensor::from_tensor(array![[0.3, -1.0, 2.0], [1.5, 0.2, -0.7]].into_dyn()).unwrap();
        let mus = [pmf(&[0.35, 0.65]), pmf(&[0.1, 0.3, 0.6])];
        let c = sinkhorn(&h, &mus, 1e-13, DEFAULT_MAX_ITER).unwrap();
        assert!((c.dual_value - primal_value(&h, &c.joint)).abs() < 1e-10);
    }

    #[test]
    fn i_sym_examples() {
        let p = product_measure(&[pmf(&[0.3, 0.7]), pmf(&[0.5, 0.5])]).unwrap();
        assert!(i_sym(&p).abs() < 1e-15);
        assert!((i_sym(&joint(array![[0.4, 0.1], [0.1, 0.4]])) - 0.192745).abs() < 5e-7);
        assert!((i_sym(&joint(array![[0.5, 0.0], [0.0, 0.5]])) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn legendre_examples() {
        let p = product_measure(&[pmf(&[0.3, 0.7]), pmf(&[0.5, 0.5])]).unwrap();
        let v = verify_legendre(&p, 2, 1).unwrap();
        assert!(v.abs() < 1e-10, "{v}");

        let mu = joint(array![[0.4, 0.1], [0.1, 0.4]]);
        let v = verify_legendre(&mu, 3, 7).unwrap();
        let target = i_sym(&mu);
        assert!(v <= target + 1e-8 && v >= target - 1e-4, "{v} vs {target}");

        let deg = joint(array![[0.3, 0.0, 0.2], [0.1, 0.0, 0.4]]);
        let v = verify_legendre(&deg, 2, 7).unwrap();
        let restricted = joint(array![[0.3, 0.2], [0.1, 0.4]]);
        assert!((v - i_sym(&restricted)).abs() < 1e-4);
    }

    #[test]
    fn legendre_handles_zero_cells() {
        let mu = joint(array![[0.5, 0.0], [0.0, 0.5]]);
        let v = verify_legendre(&mu, 1, 0).unwrap();
        assert!(v <= LN_2 + 1e-8 && v >= LN_2 - 1e-4, "{v}");
    }

    #[test]
    fn equilibrium_examples() {
        let h = PotentialTensor::from_tensor(array![[0.3, -1.0], [1.5, 0.2]].into_dyn()).unwrap();
        assert!(equilibrium_check(&h, &gibbs_measure(&h), 1e-8).unwrap().holds);

        let eq = PotentialTensor::diagonal(2, 2, 1.0);
        let gm = marginals(&gibbs_measure(&eq));
        let prod = product_measure(&gm).unwrap();
        let r = equilibrium_check(&eq, &prod, 1e-6).unwrap();
        assert!(!r.holds);
        // I_sym = 0 while μ(h) − P_sym = 1/2 − log((1+e)/2).
        assert!((r.equality_defect - (((1.0 + E) / 2.0).ln() - 0.5)).abs() < 1e-10);

        let zero = PotentialTensor::constant(&[3, 3], 0.0);
        let u = product_measure(&[pmf(&[1.0 / 3.0; 3]), pmf(&[1.0 / 3.0; 3])]).unwrap();
        assert!(equilibrium_check(&zero, &u, 1e-10).unwrap().holds);
    }

    #[test]
    fn duality_examples() {
        let h = PotentialTensor::from_tensor(array![[0.3f64, -1.0, 0.1], [1.5, 0.2, -2.0]].into_dyn()).unwrap();
        let gm = marginals(&gibbs_measure(&h));
        let r = duality_report(&h, &gm).unwrap();
        assert!(r.gap.abs() < 1e-10, "{}", r.gap);
        assert!(r.marginal_distances.iter().all(|&d| d < 1e-12));

        let eq = PotentialTensor::diagonal(2, 2, 1.0);
        let u = pmf(&[0.5, 0.5]);
        let r = duality_report(&eq, &[u.clone(), u.clone()]).unwrap();
        assert!((r.pressure - (2.0 * E + 2.0).ln()).abs() < 1e-14);
        assert!(r.gap.abs() < 1e-12);
        assert!(r.marginal_distances.iter().all(|&d| d < 1e-15));

        let r = duality_report(&eq, &[pmf(&[0.9, 0.1]), u]).unwrap();
        assert!(r.gap > 1e-3);
    }
}
