use mpl_core::math::log_sum_exp;
use mpl_core::microstates::{
    brute_force_value_all_free, finite_n_value_for_samples, mc_value_for_samples, DEFAULT_BUDGET,
};
use mpl_core::{
    approximating_sample, brute_force_value, coset_log_count, enumerate_contingency,
    finite_n_value, mc_value, Pmf, PotentialTensor, SortedSample, TypeCounts,
};
use proptest::prelude::*;
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

fn random_potential(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> PotentialTensor<f64> {
    PotentialTensor::from_fn(shape, |_| rng.random_range(-bound..=bound)).unwrap()
}

#[test]
fn exact_value_matches_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..30 {
        let n = rng.random_range(2..=3);
        let shape: Vec<usize> = (0..n).map(|_| rng.random_range(2..=3)).collect();
        let big_n = rng.random_range(1..=if n == 2 { 5 } else { 4 });
        let h = random_potential(&mut rng, &shape, 2.0);
        let mus: Vec<Pmf<f64>> = shape.iter().map(|&d| random_pmf(&mut rng, d)).collect();
        let samples: Vec<SortedSample> =
            mus.iter().map(|m| approximating_sample(m, big_n).unwrap()).collect();
        let exact = finite_n_value(&h, &mus, big_n, DEFAULT_BUDGET).unwrap().value;
        let brute = brute_force_value(&h, &samples).unwrap();
        assert!((exact - brute).abs() < 1e-10, "{exact} vs {brute}");
    }
}

#[test]
fn pinning_the_first_permutation_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let h = random_potential(&mut rng, &[2, 3], 1.5);
        let s = [
            SortedSample::new(TypeCounts::from_counts(vec![1, 3]).unwrap()),
            SortedSample::new(TypeCounts::from_counts(vec![2, 1, 1]).unwrap()),
        ];
        let pinned = brute_force_value(&h, &s).unwrap();
        let free = brute_force_value_all_free(&h, &s).unwrap();
        assert!((pinned - free).abs() < 1e-12);
    }
}

#[test]
fn coset_counts_partition_the_permutations() {
    let margins = [
        TypeCounts::from_counts(vec![3, 2, 1]).unwrap(),
        TypeCounts::from_counts(vec![2, 2, 2]).unwrap(),
        TypeCounts::from_counts(vec![4, 0, 2]).unwrap(),
    ];
    let logs: Vec<f64> = enumerate_contingency(&margins)
        .unwrap()
        .map(|t| coset_log_count(&t))
        .collect();
    let log_720: f64 = (1..=6).map(|k| (k as f64).ln()).sum();
    assert!((log_sum_exp(&logs) - 2.0 * log_720).abs() < 1e-10);
}

#[test]
fn enumeration_visits_each_table_once() {
    let margins = [
        TypeCounts::from_counts(vec![2, 2, 1]).unwrap(),
        TypeCounts::from_counts(vec![1, 3, 1]).unwrap(),
    ];
    let tables: Vec<Vec<usize>> = enumerate_contingency(&margins)
        .unwrap()
        .map(|t| t.entries().to_vec())
        .collect();
    // Independent count: every 3×3 table with these row and column sums.
    let mut expected = 0;
    for e in 0..(3usize.pow(9)) {
        let cells: Vec<usize> = (0..9).map(|k| (e / 3usize.pow(k)) % 3).collect();
        let rows_ok = (0..3).all(|r| cells[3 * r..3 * r + 3].iter().sum::<usize>() == [2, 2, 1][r]);
        let cols_ok = (0..3).all(|c| (0..3).map(|r| cells[3 * r + c]).sum::<usize>() == [1, 3, 1][c]);
        if rows_ok && cols_ok {
            expected += 1;
        }
    }
    assert_eq!(tables.len(), expected);
    let mut sorted = tables.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted, tables, "lexicographic and duplicate-free");
}

/// `(1/N) log Σ_k C(N/2,k)² e^{βk·2} / C(N,N/2)` for the two-symbol diagonal
/// potential with uniform margins.
fn diagonal_hypergeometric(n: usize, beta: f64) -> f64 {
    let half = n / 2;
    let lf = |k: usize| (1..=k).map(|j| (j as f64).ln()).sum::<f64>();
    let log_binom = |a: usize, b: usize| lf(a) - lf(b) - lf(a - b);
    let terms: Vec<f64> = (0..=half)
        .map(|k| 2.0 * log_binom(half, k) + 2.0 * beta * k as f64 - log_binom(n, half))
        .collect();
    log_sum_exp(&terms) / n as f64
}

#[test]
fn diagonal_benchmark_matches_hypergeometric_form() {
    let h = PotentialTensor::diagonal(2, 2, 1.0);
    let u = Pmf::from_weights(vec![0.5, 0.5]).unwrap();
    for n in [2, 4, 8, 50, 100] {
        let v = finite_n_value(&h, &[u.clone(), u.clone()], n, DEFAULT_BUDGET).unwrap().value;
        assert!((v - diagonal_hypergeometric(n, 1.0)).abs() < 1e-12, "N={n}");
    }
    let v8 = finite_n_value(&h, &[u.clone(), u], 8, DEFAULT_BUDGET).unwrap().value;
    assert!((v8 - 0.637924).abs() < 5e-7);
}

#[test]
fn thread_count_does_not_change_exact_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = random_potential(&mut rng, &[3, 3, 2], 1.0);
    let mus: Vec<Pmf<f64>> = [3, 3, 2].iter().map(|&d| random_pmf(&mut rng, d)).collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| finite_n_value(&h, &mus, 12, DEFAULT_BUDGET).unwrap())
    };
    let one = run(1);
    for t in [2, 3, 8] {
        assert_eq!(one, run(t));
    }
}

#[test]
fn monte_carlo_tracks_exact_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..3 {
        let h = random_potential(&mut rng, &[2, 3], 1.0);
        let mus = [random_pmf(&mut rng, 2), random_pmf(&mut rng, 3)];
        let samples: Vec<SortedSample> = mus.iter().map(|m| approximating_sample(m, 6).unwrap()).collect();
        let exact = finite_n_value_for_samples(&h, &samples, DEFAULT_BUDGET).unwrap().value;
        let mc = mc_value_for_samples(&h, &samples, 20_000, 1).unwrap();
        let se = mc.std_error.unwrap();
        assert!((mc.value - exact).abs() <= 4.0 * se + 1e-12, "{} vs {exact} ± {se}", mc.value);
    }
}

#[test]
fn monte_carlo_is_thread_independent() {
    let h = PotentialTensor::diagonal(3, 2, 0.5);
    let m = Pmf::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
    let a = mc_value(&h, &[m.clone(), m.clone()], 30, 300, 4).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| mc_value(&h, &[m.clone(), m.clone()], 30, 300, 4).unwrap());
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn approximating_sample_is_within_one_over_n(
        raw in prop::collection::vec(0.01f64..1.0, 1..6),
        n in 1usize..200,
    ) {
        let s: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let rest: f64 = w[1..].iter().sum();
        w[0] = 1.0 - rest;
        let mu = Pmf::from_weights(w.clone()).unwrap();
        let xi = approximating_sample(&mu, n).unwrap();
        prop_assert_eq!(xi.len(), n);
        let seq = xi.sequence();
        prop_assert!(seq.windows(2).all(|p| p[0] <= p[1]));
        for (c, m) in xi.types().counts().iter().zip(&w) {
            prop_assert!((*c as f64 / n as f64 - m).abs() < 1.0 / n as f64);
        }
    }

    #[test]
    fn enumerated_tables_have_the_requested_margins(
        a in prop::collection::vec(0usize..4, 2..4),
        b_shape in 2usize..4,
    ) {
        let total: usize = a.iter().sum();
        prop_assume!(total > 0);
        // Spread the same total over the second axis.
        let mut b = vec![total / b_shape; b_shape];
        b[0] += total % b_shape;
        let margins = [TypeCounts::from_counts(a.clone()).unwrap(), TypeCounts::from_counts(b.clone()).unwrap()];
        for t in enumerate_contingency(&margins).unwrap() {
            prop_assert_eq!(t.margins()[0].counts(), a.as_slice());
            prop_assert_eq!(t.margins()[1].counts(), b.as_slice());
        }
    }
}
