use mpl_core::measures::mutual_information_by_entropies;
use mpl_core::microstates::DEFAULT_BUDGET;
use mpl_core::mutual_pressure::{primal_value, sinkhorn};
use mpl_core::{
    duality_report, equilibrium_check, finite_n_value, gibbs_measure, i_sym, marginals,
    mutual_pressure_limit, product_measure, relative_entropy, verify_legendre, JointPmf, Pmf,
    PotentialTensor,
};
use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pmf(rng: &mut ChaCha8Rng, d: usize) -> Pmf<f64> {
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut w: Vec<f64> = w.iter().map(|x| x / s).collect();
    let rest: f64 = w[1..].iter().sum();
    w[0] = 1.0 - rest;
    Pmf::from_weights(w).unwrap()
}

fn random_shape(rng: &mut ChaCha8Rng, max_d: usize, max_n: usize) -> Vec<usize> {
    let n = rng.random_range(2..=max_n);
    (0..n).map(|_| rng.random_range(2..=max_d)).collect()
}

fn random_potential(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> PotentialTensor<f64> {
    PotentialTensor::from_fn(shape, |_| rng.random_range(-bound..=bound)).unwrap()
}

fn random_joint(rng: &mut ChaCha8Rng, shape: &[usize]) -> JointPmf<f64> {
    let raw = ArrayD::from_shape_fn(IxDyn(shape), |_| rng.random_range(0.01..1.0f64));
    let s = raw.sum();
    let mut w = raw.mapv(|x| x / s);
    let rest: f64 = w.iter().skip(1).sum();
    w.as_slice_mut().unwrap()[0] = 1.0 - rest;
    JointPmf::from_tensor(w).unwrap()
}

fn limit(h: &PotentialTensor<f64>, mus: &[Pmf<f64>]) -> f64 {
    mutual_pressure_limit(h, mus, 1e-12).unwrap().value
}

/// Moves `eps` of mass from the heaviest symbol to the lightest.
fn shift(mu: &Pmf<f64>, eps: f64) -> Pmf<f64> {
    let w = mu.weights();
    let hi = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    let lo = (0..w.len()).min_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    let mut v = w.to_vec();
    v[hi] -= eps;
    v[lo] += eps;
    Pmf::from_weights(v).unwrap()
}

#[test]
fn duality_gap_is_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..60 {
        let shape = random_shape(&mut rng, 4, 3);
        let h = random_potential(&mut rng, &shape, 3.0);
        let mus: Vec<Pmf<f64>> = shape.iter().map(|&d| random_pmf(&mut rng, d)).collect();
        let r = duality_report(&h, &mus).unwrap();
        assert!(r.gap >= -1e-8, "gap {}", r.gap);
    }
}

#[test]
fn gap_vanishes_exactly_at_gibbs_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for _ in 0..20 {
        let shape = random_shape(&mut rng, 4, 3);
        let h = random_potential(&mut rng, &shape, 3.0);
        let gm = marginals(&gibbs_measure(&h));
        let at = duality_report(&h, &gm).unwrap();
        assert!(at.gap.abs() < 1e-6, "{}", at.gap);
        let mut moved = gm.clone();
        moved[0] = shift(&gm[0], 0.1);
        let off = duality_report(&h, &moved).unwrap();
        assert!(off.gap > 1e-3, "{}", off.gap);
        assert!(off.marginal_distances[0] > 0.09);
    }
}

#[test]
fn legendre_transform_is_mutual_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    for _ in 0..40 {
        let shape = random_shape(&mut rng, 3, 3);
        let mu = random_joint(&mut rng, &shape);
        let i = i_sym(&mu);
        let by_entropies = mutual_information_by_entropies(&mu);
        let prod = product_measure(&marginals(&mu)).unwrap();
        let kl = relative_entropy(&mu, &prod).unwrap().finite().unwrap();
        assert!((i - by_entropies).abs() < 1e-10);
        assert!((i - kl).abs() < 1e-10);
    }
    for _ in 0..6 {
        let d1 = rng.random_range(2..=3);
        let d2 = rng.random_range(2..=3);
        let mu = random_joint(&mut rng, &[d1, d2]);
        let v = verify_legendre(&mu, 2, 3).unwrap();
        let i = i_sym(&mu);
        assert!(v <= i + 1e-8 && v >= i - 1e-4, "{v} vs {i}");
    }
}

#[test]
fn coupling_is_the_constrained_maximizer() {
    // No other coupling with the same marginals beats μ* on μ(h) − I_sym(μ).
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let h = random_potential(&mut rng, &[3, 3], 2.0);
    let mus = [random_pmf(&mut rng, 3), random_pmf(&mut rng, 3)];
    let best = sinkhorn(&h, &mus, 1e-13, 100_000).unwrap();
    for _ in 0..50 {
        // Perturb along a zero-margin direction.
        let (a, b) = (rng.random_range(0..2), rng.random_range(0..2));
        let eps = rng.random_range(-1e-3..1e-3);
        let mut w = best.joint.weights().clone();
        w[[a, b]] += eps;
        w[[a + 1, b + 1]] += eps;
        w[[a, b + 1]] -= eps;
        w[[a + 1, b]] -= eps;
        if w.iter().any(|&x| x < 0.0) {
            continue;
        }
        let other = JointPmf::from_tensor(w).unwrap();
        assert!(primal_value(&h, &other) <= best.dual_value + 1e-12);
    }
}

#[test]
fn monotone_convex_and_lipschitz() {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    for _ in 0..40 {
        let shape = random_shape(&mut rng, 3, 3);
        let mus: Vec<Pmf<f64>> = shape.iter().map(|&d| random_pmf(&mut rng, d)).collect();
        let h = random_potential(&mut rng, &shape, 2.0);
        let g = random_potential(&mut rng, &shape, 2.0);
        let lam = rng.random_range(0.0..1.0);
        let (ph, pg) = (limit(&h, &mus), limit(&g, &mus));
        let mix = h.combine(&g, lam, 1.0 - lam).unwrap();
        assert!(limit(&mix, &mus) <= lam * ph + (1.0 - lam) * pg + 1e-8);
        let diff = h.combine(&g, 1.0, -1.0).unwrap().sup_norm();
        assert!((ph - pg).abs() <= diff + 1e-8);
        let bump = random_potential(&mut rng, &shape, 0.25).map(|x| x + 0.25);
        let up = h.combine(&bump, 1.0, 1.0).unwrap();
        assert!(limit(&up, &mus) >= ph - 1e-8);
    }
}

#[test]
fn subadditive_across_coordinate_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(49);
    for _ in 0..30 {
        let h1 = random_potential(&mut rng, &[2, 3], 2.0);
        let h2 = random_potential(&mut rng, &[3], 2.0);
        let m: Vec<Pmf<f64>> = [2, 3, 3].iter().map(|&d| random_pmf(&mut rng, d)).collect();
        let joint = PotentialTensor::direct_sum(&h1, &h2);
        let whole = limit(&joint, &m);
        let parts = limit(&h1, &m[..2]) + limit(&h2, &m[2..]);
        assert!(whole <= parts + 1e-8, "{whole} > {parts}");
    }
}

#[test]
fn separable_tilt_shifts_by_its_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..40 {
        let shape = random_shape(&mut rng, 4, 3);
        let h = random_potential(&mut rng, &shape, 2.0);
        let mus: Vec<Pmf<f64>> = shape.iter().map(|&d| random_pmf(&mut rng, d)).collect();
        let g: Vec<Vec<f64>> = shape
            .iter()
            .map(|&d| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let tilted = h.minus_separable(&g).unwrap();
        let mean: f64 = mus.iter().zip(&g).map(|(m, gi)| m.expect(gi)).sum();
        assert!((limit(&tilted, &mus) - (limit(&h, &mus) - mean)).abs() < 1e-8);
    }
}

#[test]
fn continuous_in_the_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..30 {
        let shape = random_shape(&mut rng, 3, 3);
        let h = random_potential(&mut rng, &shape, 2.0);
        let mus: Vec<Pmf<f64>> = shape.iter().map(|&d| random_pmf(&mut rng, d)).collect();
        let eps = rng.random_range(0.001..0.01);
        let moved: Vec<Pmf<f64>> = mus.iter().map(|m| shift(m, eps)).collect();
        let n = shape.len() as f64;
        let d = *shape.iter().max().unwrap() as f64;
        let c = 2.0 * (h.sup_norm() + n * d.ln());
        assert!((limit(&h, &mus) - limit(&h, &moved)).abs() <= c * eps);
    }
}

#[test]
fn finite_n_values_approach_the_limit() {
    let h = PotentialTensor::diagonal(2, 2, 1.0);
    let u = Pmf::from_weights(vec![0.5, 0.5]).unwrap();
    let lim = limit(&h, &[u.clone(), u.clone()]);
    let mut last = f64::INFINITY;
    for n in [50, 100, 200, 400] {
        let v = finite_n_value(&h, &[u.clone(), u.clone()], n, DEFAULT_BUDGET).unwrap().value;
        let err = (v - lim).abs();
        assert!(err < last);
        last = err;
    }
    assert!(last < 0.02);

    // Same trend off the symmetric case.
    let m = [Pmf::from_weights(vec![0.25, 0.75]).unwrap(), Pmf::from_weights(vec![0.5, 0.5]).unwrap()];
    let lim = limit(&h, &m);
    let e40 = (finite_n_value(&h, &m, 40, DEFAULT_BUDGET).unwrap().value - lim).abs();
    let e320 = (finite_n_value(&h, &m, 320, DEFAULT_BUDGET).unwrap().value - lim).abs();
    assert!(e320 < e40);
}

#[test]
fn gibbs_measure_is_mutually_equilibrium() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..10 {
        let shape = random_shape(&mut rng, 3, 3);
        let h = random_potential(&mut rng, &shape, 2.0);
        let g = gibbs_measure(&h);
        assert!(equilibrium_check(&h, &g, 1e-8).unwrap().holds);
        let other = random_joint(&mut rng, &shape);
        assert!(!equilibrium_check(&h, &other, 1e-8).unwrap().holds);
    }
}

#[test]
fn single_precision_agrees_with_double() {
    let h64 = PotentialTensor::<f64>::diagonal(3, 2, 0.7);
    let h32 = PotentialTensor::<f32>::diagonal(3, 2, 0.7);
    let m64 = Pmf::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
    let m32 = Pmf::<f32>::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
    let a = mutual_pressure_limit(&h64, &[m64.clone(), m64], 1e-12).unwrap().value;
    let b = mutual_pressure_limit(&h32, &[m32.clone(), m32], 1e-5).unwrap().value;
    assert!((a - f64::from(b)).abs() < 1e-4);
}
