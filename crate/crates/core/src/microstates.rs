//! Permutation micro-states.
//!
//! A micro-state for a marginal `μᵢ` is a sorted sequence `ξᵢ(N)` whose type
//! approximates `μᵢ`. The finite-`N` mutual pressure averages
//! `exp(N κ_N(h(σ₁ξ₁, ..., σₙξₙ)))` over independent uniform permutations.
//!
//! Three routes compute it:
//!
//! * [`brute_force_value`] walks every permutation tuple (tiny `N` only);
//! * [`finite_n_value`] groups tuples by their joint type, a contingency
//!   tensor with the micro-states' counts as margins, and weights each tensor
//!   by the exact number of tuples realizing it;
//! * [`mc_value`] samples permutation tuples.
//!
//! The first permutation is pinned to the identity throughout: relabeling all
//! positions by a common permutation leaves `κ_N` unchanged.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{Method, MutualPressureEstimate};
use crate::math::{log_sum_exp, LogFactorial, LogSumExp};
use crate::measures::{Alphabet, Pmf};
use crate::pressure::PotentialTensor;
use crate::rng;
use crate::scalar::Scalar;

/// Largest `N` accepted by [`brute_force_value`].
pub const BRUTE_FORCE_MAX_N: usize = 7;
/// Largest arity accepted by [`brute_force_value`].
pub const BRUTE_FORCE_MAX_ARITY: usize = 3;
/// Largest `N` accepted by [`brute_force_value_all_free`].
pub const ALL_FREE_MAX_N: usize = 4;
/// Default cap on the number of contingency tensors visited.
pub const DEFAULT_BUDGET: u64 = 100_000_000;
/// Bootstrap resamples behind the Monte Carlo standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Per-symbol counts of a sequence of length `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypeCounts {
    alphabet: Alphabet,
    counts: Vec<usize>,
}

impl TypeCounts {
    pub fn new(alphabet: Alphabet, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != alphabet.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} counts for {} symbols",
                counts.len(),
                alphabet.len()
            )));
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidArgument("type of an empty sequence".into()));
        }
        Ok(TypeCounts { alphabet, counts })
    }

    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        Self::new(Alphabet::indexed(counts.len().max(1)), counts)
    }

    pub fn from_sequence(alphabet: Alphabet, seq: &[usize]) -> Result<Self> {
        let mut counts = vec![0; alphabet.len()];
        for &x in seq {
            if x >= counts.len() {
                return Err(Error::IndexOutOfRange {
                    index: x,
                    len: counts.len(),
                });
            }
            counts[x] += 1;
        }
        Self::new(alphabet, counts)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Sequence length `N`.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// The type `ν(t) = N(t)/N` as a pmf.
    pub fn type_pmf<S: Scalar>(&self) -> Pmf<S> {
        let n = S::from_usize(self.total()).unwrap();
        Pmf::from_parts_unchecked(
            self.alphabet.clone(),
            self.counts
                .iter()
                .map(|&c| S::from_usize(c).unwrap() / n)
                .collect(),
        )
    }
}

/// The sorted sequence `(t₁, ..., t₁, t₂, ..., t_d)` with given counts.
///
/// Only the counts are stored; [`SortedSample::sequence`] materializes it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SortedSample {
    types: TypeCounts,
}

impl SortedSample {
    pub fn new(types: TypeCounts) -> Self {
        SortedSample { types }
    }

    /// Canonical sample of a sequence: sort it.
    pub fn from_sequence(alphabet: Alphabet, seq: &[usize]) -> Result<Self> {
        Ok(SortedSample {
            types: TypeCounts::from_sequence(alphabet, seq)?,
        })
    }

    pub fn types(&self) -> &TypeCounts {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.total()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Symbol indices in nondecreasing order.
    pub fn sequence(&self) -> Vec<usize> {
        self.types
            .counts
            .iter()
            .enumerate()
            .flat_map(|(t, &c)| std::iter::repeat_n(t, c))
            .collect()
    }
}

/// Nonnegative integer tensor with prescribed one-dimensional margins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTensor {
    shape: Vec<usize>,
    entries: Vec<usize>,
    margins: Arc<[TypeCounts]>,
}

impl ContingencyTensor {
    /// Builds a tensor from row-major entries, deriving its margins.
    pub fn from_entries(alphabets: Vec<Alphabet>, entries: Vec<usize>) -> Result<Self> {
        let shape: Vec<usize> = alphabets.iter().map(Alphabet::len).collect();
        if entries.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for shape {shape:?}",
                entries.len()
            )));
        }
        let mut counts: Vec<Vec<usize>> = shape.iter().map(|&d| vec![0; d]).collect();
        let mut idx = vec![0; shape.len()];
        for &e in &entries {
            for (i, &t) in idx.iter().enumerate() {
                counts[i][t] += e;
            }
            increment(&mut idx, &shape);
        }
        let margins = alphabets
            .into_iter()
            .zip(counts)
            .map(|(a, c)| TypeCounts::new(a, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(ContingencyTensor {
            shape,
            entries,
            margins: margins.into(),
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn margins(&self) -> &[TypeCounts] {
        &self.margins
    }

    pub fn total(&self) -> usize {
        self.entries.iter().sum()
    }
}

/// Row-major odometer step.
fn increment(idx: &mut [usize], shape: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}

/// A tuple of permutations of `{0, ..., N-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationTuple {
    perms: Vec<Vec<usize>>,
}

impl PermutationTuple {
    pub fn new(perms: Vec<Vec<usize>>) -> Result<Self> {
        let len = perms.first().map_or(0, Vec::len);
        for p in &perms {
            if p.len() != len {
                return Err(Error::ShapeMismatch("permutations of different lengths".into()));
            }
            let mut seen = vec![false; len];
            for &x in p {
                if x >= len || std::mem::replace(&mut seen[x], true) {
                    return Err(Error::InvalidArgument(format!("{p:?} is not a permutation")));
                }
            }
        }
        Ok(PermutationTuple { perms })
    }

    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    /// Applies `σ(x) = (x_{σ⁻¹(1)}, ..., x_{σ⁻¹(N)})` coordinatewise.
    pub fn apply(&self, seqs: &[Vec<usize>]) -> Vec<Vec<usize>> {
        self.perms
            .iter()
            .zip(seqs)
            .map(|(p, x)| {
                let mut out = vec![0; x.len()];
                for (j, &target) in p.iter().enumerate() {
                    out[target] = x[j];
                }
                out
            })
            .collect()
    }
}

/// Counts by largest-remainder rounding of `N·μ`, ties to the lowest index.
///
/// Every type error satisfies `|ν(t) − μ(t)| < 1/N`.
pub fn approximating_sample<S: Scalar>(mu: &Pmf<S>, n: usize) -> Result<SortedSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let nn = S::from_usize(n).unwrap();
    let scaled: Vec<S> = mu.weights().iter().map(|&w| w * nn).collect();
    let mut counts: Vec<usize> = scaled
        .iter()
        .map(|x| x.floor().to_usize().unwrap_or(0).min(n))
        .collect();
    let placed: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    let frac = |t: usize| scaled[t] - scaled[t].floor();
    // Stable sort keeps the lowest index first among equal remainders.
    order.sort_by(|&a, &b| frac(b).partial_cmp(&frac(a)).unwrap());
    for &t in order.iter().take(n.saturating_sub(placed)) {
        counts[t] += 1;
    }
    Ok(SortedSample::new(TypeCounts::new(
        mu.alphabet().clone(),
        counts,
    )?))
}

fn check_sequences<S: Scalar>(h: &PotentialTensor<S>, xs: &[&[usize]]) -> Result<usize> {
    if xs.len() != h.arity() {
        return Err(Error::ShapeMismatch(format!(
            "{} sequences for a potential of arity {}",
            xs.len(),
            h.arity()
        )));
    }
    let n = xs[0].len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty sequences".into()));
    }
    let shape = h.shape();
    for (i, x) in xs.iter().enumerate() {
        if x.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "sequence {i} has length {} instead of {n}",
                x.len()
            )));
        }
        if let Some(&bad) = x.iter().find(|&&t| t >= shape[i]) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: shape[i],
            });
        }
    }
    Ok(n)
}

/// `κ_N(h(x₁, ..., xₙ)) = (1/N) Σ_j h(x₁ⱼ, ..., xₙⱼ)`.
pub fn kappa<S: Scalar>(h: &PotentialTensor<S>, xs: &[&[usize]]) -> Result<S> {
    let n = check_sequences(h, xs)?;
    let mut w = vec![0; xs.len()];
    let mut acc = S::zero();
    for j in 0..n {
        for (i, x) in xs.iter().enumerate() {
            w[i] = x[j];
        }
        acc += h.at(&w);
    }
    Ok(acc / S::from_usize(n).unwrap())
}

fn check_samples<S: Scalar>(h: &PotentialTensor<S>, samples: &[SortedSample]) -> Result<usize> {
    if samples.len() != h.arity() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples for a potential of arity {}",
            samples.len(),
            h.arity()
        )));
    }
    let shape = h.shape();
    let n = samples[0].len();
    for (i, s) in samples.iter().enumerate() {
        if s.types.counts.len() != shape[i] {
            return Err(Error::ShapeMismatch(format!(
                "sample {i} lives on {} symbols, potential axis has {}",
                s.types.counts.len(),
                shape[i]
            )));
        }
        if s.len() != n {
            return Err(Error::InconsistentMargins(format!(
                "sample {i} has length {} instead of {n}",
                s.len()
            )));
        }
    }
    Ok(n)
}

/// All permutations of `0..n` (Heap's algorithm).
fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Reference value `(1/N) log[(N!)^{-n} Σ_{σ₁..σₙ} exp(N κ_N)]` by visiting
/// every tuple with `σ₁ = id`. Cost `(N!)^{n−1}`; capped at
/// `N ≤ 7`, `n ≤ 3`.
pub fn brute_force_value<S: Scalar>(h: &PotentialTensor<S>, samples: &[SortedSample]) -> Result<S> {
    brute_force_impl(h, samples, false)
}

/// Same as [`brute_force_value`] with all `n` permutations free; `N ≤ 4`.
pub fn brute_force_value_all_free<S: Scalar>(
    h: &PotentialTensor<S>,
    samples: &[SortedSample],
) -> Result<S> {
    brute_force_impl(h, samples, true)
}

fn brute_force_impl<S: Scalar>(
    h: &PotentialTensor<S>,
    samples: &[SortedSample],
    all_free: bool,
) -> Result<S> {
    let n = check_samples(h, samples)?;
    let arity = samples.len();
    let cap = if all_free { ALL_FREE_MAX_N } else { BRUTE_FORCE_MAX_N };
    if n > cap || arity > BRUTE_FORCE_MAX_ARITY {
        return Err(Error::CapExceeded(format!(
            "N = {n}, n = {arity} (limits N ≤ {cap}, n ≤ {BRUTE_FORCE_MAX_ARITY})"
        )));
    }
    let seqs: Vec<Vec<usize>> = samples.iter().map(SortedSample::sequence).collect();
    let perms = all_permutations(n);
    let free = if all_free { arity } else { arity - 1 };
    let fixed = arity - free;
    let identity: Vec<usize> = (0..n).collect();
    let mut choice = vec![0usize; free];
    let mut acc = LogSumExp::new();
    let mut w = vec![0; arity];
    loop {
        let mut total = S::zero();
        for j in 0..n {
            for i in 0..arity {
                let p = if i < fixed { &identity } else { &perms[choice[i - fixed]] };
                w[i] = seqs[i][p[j]];
            }
            total += h.at(&w);
        }
        acc.push(total);
        // Odometer over the free permutations.
        let mut k = free;
        loop {
            if k == 0 {
                let lf = LogFactorial::<S>::new(n);
                let norm = S::from_usize(free).unwrap() * lf.get(n);
                return Ok((acc.value() - norm) / S::from_usize(n).unwrap());
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < perms.len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

/// Depth-first enumeration of the contingency tensors with given margins.
///
/// Cells are filled in row-major order. Each cell's range is
/// `[max(0, rᵢ − capᵢ), min_i rᵢ]`, where `rᵢ` is the residual margin of the
/// cell's slice along axis `i` and `capᵢ` bounds what the later cells of that
/// slice can still absorb.
#[derive(Debug, Clone)]
pub struct ContingencyIter {
    shape: Vec<usize>,
    margins: Arc<[TypeCounts]>,
    cell_index: Vec<Vec<usize>>,
    // later_in_slice[k][i]: cells after k sharing coordinate i with k.
    later_in_slice: Vec<Vec<Vec<usize>>>,
    residual: Vec<Vec<usize>>,
    entries: Vec<usize>,
    hi: Vec<usize>,
    start: usize,
    started: bool,
    finished: bool,
}

impl ContingencyIter {
    pub fn new(margins: &[TypeCounts]) -> Result<Self> {
        Self::with_prefix(margins, &[])
    }

    /// Enumerates only tensors whose first cells equal `prefix`.
    pub fn with_prefix(margins: &[TypeCounts], prefix: &[usize]) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::InvalidArgument("no margins".into()));
        }
        let n = margins[0].total();
        if let Some(bad) = margins.iter().find(|m| m.total() != n) {
            return Err(Error::InconsistentMargins(format!(
                "totals {n} and {}",
                bad.total()
            )));
        }
        let shape: Vec<usize> = margins.iter().map(|m| m.counts.len()).collect();
        let cells: usize = shape.iter().product();
        if prefix.len() > cells {
            return Err(Error::InvalidArgument("prefix longer than the tensor".into()));
        }
        let mut cell_index = Vec::with_capacity(cells);
        let mut idx = vec![0; shape.len()];
        for _ in 0..cells {
            cell_index.push(idx.clone());
            increment(&mut idx, &shape);
        }
        let later_in_slice = (0..cells)
            .map(|k| {
                (0..shape.len())
                    .map(|i| {
                        (k + 1..cells)
                            .filter(|&v| cell_index[v][i] == cell_index[k][i])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut it = ContingencyIter {
            residual: margins.iter().map(|m| m.counts.clone()).collect(),
            margins: margins.into(),
            shape,
            cell_index,
            later_in_slice,
            entries: vec![0; cells],
            hi: vec![0; cells],
            start: prefix.len(),
            started: false,
            finished: false,
        };
        for (k, &v) in prefix.iter().enumerate() {
            let fits = it.cell_index[k]
                .iter()
                .enumerate()
                .all(|(i, &t)| it.residual[i][t] >= v);
            if !fits {
                it.finished = true;
                break;
            }
            it.set(k, v);
        }
        Ok(it)
    }

    fn set(&mut self, k: usize, v: usize) {
        let old = self.entries[k];
        for (i, &t) in self.cell_index[k].iter().enumerate() {
            self.residual[i][t] = self.residual[i][t] + old - v;
        }
        self.entries[k] = v;
    }

    fn cell_cap(&self, v: usize) -> usize {
        self.cell_index[v]
            .iter()
            .enumerate()
            .map(|(i, &t)| self.residual[i][t])
            .min()
            .unwrap_or(0)
    }

    fn bounds(&self, k: usize) -> (usize, usize) {
        let mut lo = 0;
        let mut hi = usize::MAX;
        for (i, &t) in self.cell_index[k].iter().enumerate() {
            let r = self.residual[i][t];
            hi = hi.min(r);
            let cap: usize = self.later_in_slice[k][i]
                .iter()
                .map(|&v| self.cell_cap(v))
                .sum();
            lo = lo.max(r.saturating_sub(cap));
        }
        (lo, hi)
    }

    /// Range of the first free cell, before anything is placed.
    pub fn first_cell_range(&self) -> Option<(usize, usize)> {
        if self.start >= self.entries.len() || self.finished {
            return None;
        }
        let (lo, hi) = self.bounds(self.start);
        (lo <= hi).then_some((lo, hi))
    }

    /// Moves to the next tensor; `false` once exhausted.
    pub fn advance(&mut self) -> bool {
        if self.finished {
            return false;
        }
        let cells = self.entries.len();
        let (mut k, mut down) = if self.started {
            if cells == self.start {
                self.finished = true;
                return false;
            }
            (cells - 1, false)
        } else {
            self.started = true;
            (self.start, true)
        };
        loop {
            if down {
                if k == cells {
                    if self.residual.iter().all(|r| r.iter().all(|&x| x == 0)) {
                        return true;
                    }
                    if k == self.start {
                        self.finished = true;
                        return false;
                    }
                    k -= 1;
                    down = false;
                    continue;
                }
                let (lo, hi) = self.bounds(k);
                if lo > hi {
                    if k == self.start {
                        self.finished = true;
                        return false;
                    }
                    k -= 1;
                    down = false;
                    continue;
                }
                self.hi[k] = hi;
                self.set(k, lo);
                k += 1;
            } else if self.entries[k] < self.hi[k] {
                let v = self.entries[k] + 1;
                self.set(k, v);
                down = true;
                k += 1;
            } else {
                self.set(k, 0);
                if k == self.start {
                    self.finished = true;
                    return false;
                }
                k -= 1;
            }
        }
    }

    /// Entries of the current tensor (valid after [`advance`](Self::advance)
    /// returned `true`).
    pub fn current_entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn cell_index(&self, k: usize) -> &[usize] {
        &self.cell_index[k]
    }

    pub fn cells(&self) -> usize {
        self.entries.len()
    }
}

impl Iterator for ContingencyIter {
    type Item = ContingencyTensor;

    fn next(&mut self) -> Option<ContingencyTensor> {
        self.advance().then(|| ContingencyTensor {
            shape: self.shape.clone(),
            entries: self.entries.clone(),
            margins: self.margins.clone(),
        })
    }
}

/// Every nonnegative integer tensor with the given one-dimensional margins,
/// each exactly once, in lexicographic order of row-major entries.
pub fn enumerate_contingency(margins: &[TypeCounts]) -> Result<ContingencyIter> {
    ContingencyIter::new(margins)
}

/// `log` of the number of tuples `(σ₂, ..., σₙ)` (with `σ₁ = id`) whose joint
/// type is `T`: `Σᵢ Σ_t log Nᵢ(t)! − Σ_w log T(w)!`.
pub fn coset_log_count<S: Scalar>(t: &ContingencyTensor) -> S {
    let lf = LogFactorial::new(t.total());
    coset_log_count_with(&lf, &t.margins, &t.entries)
}

fn coset_log_count_with<S: Scalar>(
    lf: &LogFactorial<S>,
    margins: &[TypeCounts],
    entries: &[usize],
) -> S {
    margin_log_factorials(lf, margins) - entries.iter().map(|&e| lf.get(e)).sum::<S>()
}

fn margin_log_factorials<S: Scalar>(lf: &LogFactorial<S>, margins: &[TypeCounts]) -> S {
    margins
        .iter()
        .flat_map(|m| m.counts.iter())
        .map(|&c| lf.get(c))
        .sum()
}

/// Exact finite-`N` mutual pressure with `ξᵢ = approximating_sample(μᵢ, N)`.
///
/// Fails with [`Error::BudgetExceeded`] when more than `budget` tensors would
/// be visited.
pub fn finite_n_value<S: Scalar>(
    h: &PotentialTensor<S>,
    marginals: &[Pmf<S>],
    n: usize,
    budget: u64,
) -> Result<MutualPressureEstimate<S>> {
    let samples = marginals
        .iter()
        .map(|m| approximating_sample(m, n))
        .collect::<Result<Vec<_>>>()?;
    finite_n_value_for_samples(h, &samples, budget)
}

/// Exact finite-`N` mutual pressure for explicit micro-states.
pub fn finite_n_value_for_samples<S: Scalar>(
    h: &PotentialTensor<S>,
    samples: &[SortedSample],
    budget: u64,
) -> Result<MutualPressureEstimate<S>> {
    let n = check_samples(h, samples)?;
    let arity = samples.len();
    let nn = S::from_usize(n).unwrap();
    if arity == 1 {
        let seq = samples[0].sequence();
        let mut est = MutualPressureEstimate::bare(kappa(h, &[&seq])?, Method::FiniteNExact);
        est.sample_size = Some(n);
        est.tensors_visited = Some(1);
        return Ok(est);
    }
    let margins: Vec<TypeCounts> = samples.iter().map(|s| s.types.clone()).collect();
    let lf = LogFactorial::<S>::new(n);
    let constant = margin_log_factorials(&lf, &margins)
        - S::from_usize(arity - 1).unwrap() * lf.get(n);
    let hv = h.as_slice();

    let root = ContingencyIter::new(&margins)?;
    let Some((lo, hi)) = root.first_cell_range() else {
        return Err(Error::InconsistentMargins("no tensor has these margins".into()));
    };
    let visited = AtomicU64::new(0);
    // One DFS subtree per value of the first cell; partial sums are merged in
    // subtree order, so the result does not depend on the thread count.
    let partials: Vec<Result<LogSumExp<S>>> = (lo..=hi)
        .into_par_iter()
        .map(|first| {
            let mut it = ContingencyIter::with_prefix(&margins, &[first])?;
            let mut acc = LogSumExp::new();
            let mut local = 0u64;
            while it.advance() {
                let e = it.current_entries();
                let mut term = constant;
                for (k, &c) in e.iter().enumerate() {
                    if c > 0 {
                        term += hv[k] * S::from_usize(c).unwrap() - lf.get(c);
                    }
                }
                acc.push(term);
                local += 1;
                if local.is_multiple_of(4096) {
                    let total = visited.fetch_add(4096, Ordering::Relaxed) + 4096;
                    if total > budget {
                        return Err(Error::BudgetExceeded { budget });
                    }
                }
            }
            let total = visited.fetch_add(local % 4096, Ordering::Relaxed) + local % 4096;
            if total > budget {
                return Err(Error::BudgetExceeded { budget });
            }
            Ok(acc)
        })
        .collect();
    let mut acc = LogSumExp::new();
    for p in partials {
        acc.merge(&p?);
    }
    let mut est = MutualPressureEstimate::bare(acc.value() / nn, Method::FiniteNExact);
    est.sample_size = Some(n);
    est.tensors_visited = Some(visited.load(Ordering::Relaxed));
    Ok(est)
}

/// Shared Monte Carlo kernel.
///
/// `total(perms)` must return `Σ_j h(...)` for the tuple with `perms[0]` the
/// identity. Draws use the `"mc"` stream of `seed`; bootstrap resamples
/// continue on the same stream.
pub(crate) fn mc_kernel<S: Scalar>(
    arity: usize,
    len: usize,
    draws: usize,
    seed: u64,
    mut total: impl FnMut(&[Vec<usize>]) -> S,
) -> Result<MutualPressureEstimate<S>> {
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least 2 Monte Carlo samples".into()));
    }
    let mut rng = rng::stream(seed, "mc");
    let mut perms: Vec<Vec<usize>> = (0..arity).map(|_| (0..len).collect()).collect();
    let mut log_weights = Vec::with_capacity(draws);
    for _ in 0..draws {
        for p in perms.iter_mut().skip(1) {
            for i in (1..len).rev() {
                let j = rng.random_range(0..=i);
                p.swap(i, j);
            }
        }
        log_weights.push(total(&perms));
    }
    let nn = S::from_usize(len).unwrap();
    let log_s = S::from_usize(draws).unwrap().ln();
    let estimate = |lw: &[S]| (log_sum_exp(lw) - log_s) / nn;
    let value = estimate(&log_weights);

    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut resample = vec![S::zero(); draws];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for slot in resample.iter_mut() {
            *slot = log_weights[rng.random_range(0..draws)];
        }
        boot.push(estimate(&resample));
    }
    let b = S::from_usize(BOOTSTRAP_RESAMPLES).unwrap();
    let mean = boot.iter().copied().sum::<S>() / b;
    let var = boot.iter().map(|&x| (x - mean) * (x - mean)).sum::<S>() / (b - S::one());

    let mut est = MutualPressureEstimate::bare(value, Method::MonteCarlo);
    est.sample_size = Some(len);
    est.std_error = Some(var.sqrt());
    est.mc_samples = Some(draws);
    Ok(est)
}

/// Monte Carlo finite-`N` mutual pressure from `draws` uniform permutation
/// tuples (Fisher–Yates, `σ₁ = id`).
///
/// `(1/N)[logsumexp_s(N κ_s) − log S]` is biased low for finite `S` since
/// `log` is concave. The standard error comes from 200 bootstrap resamples.
pub fn mc_value<S: Scalar>(
    h: &PotentialTensor<S>,
    marginals: &[Pmf<S>],
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<MutualPressureEstimate<S>> {
    let samples = marginals
        .iter()
        .map(|m| approximating_sample(m, n))
        .collect::<Result<Vec<_>>>()?;
    mc_value_for_samples(h, &samples, draws, seed)
}

pub fn mc_value_for_samples<S: Scalar>(
    h: &PotentialTensor<S>,
    samples: &[SortedSample],
    draws: usize,
    seed: u64,
) -> Result<MutualPressureEstimate<S>> {
    let n = check_samples(h, samples)?;
    let seqs: Vec<Vec<usize>> = samples.iter().map(SortedSample::sequence).collect();
    if seqs.len() == 1 {
        let mut est = MutualPressureEstimate::bare(kappa(h, &[&seqs[0]])?, Method::MonteCarlo);
        est.sample_size = Some(n);
        est.std_error = Some(S::zero());
        est.mc_samples = Some(draws);
        return Ok(est);
    }
    let hv = h.as_slice();
    let shape = h.shape();
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    mc_kernel(seqs.len(), n, draws, seed, |perms| {
        let mut acc = S::zero();
        for j in 0..n {
            let mut flat = 0;
            for (i, p) in perms.iter().enumerate() {
                flat += seqs[i][p[j]] * strides[i];
            }
            acc += hv[flat];
        }
        acc
    })
}
