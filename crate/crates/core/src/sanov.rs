//! Typical-set probabilities and large-deviation rates by the method of types.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{LogFactorial, LogSumExp};
use crate::measures::Pmf;
use crate::scalar::{Extended, Scalar};

/// Largest sample size accepted by [`typical_set_log_prob`].
pub const MAX_N: usize = 1_000_000;
/// Largest alphabet accepted by [`typical_set_log_prob`].
pub const MAX_ALPHABET: usize = 4;
/// Types visited before [`typical_set_log_prob`] gives up.
pub const TYPE_BUDGET: u64 = 2_000_000_000;
/// Allowed distance to the rate at the largest `N` in [`lemma31_check`].
pub const RATE_AGREEMENT: f64 = 0.02;

/// The window `Δ(μ₁; N, δ) = {x : |ν_x(t) − μ₁(t)| < δ for all t}` with
/// reference measure `μ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalSetSpec<S> {
    pub reference: Pmf<S>,
    pub target: Pmf<S>,
    pub delta: S,
    pub n: usize,
}

impl<S: Scalar> TypicalSetSpec<S> {
    pub fn new(reference: Pmf<S>, target: Pmf<S>, delta: S, n: usize) -> Result<Self> {
        if reference.len() != target.len() {
            return Err(Error::ShapeMismatch(format!(
                "reference on {} symbols, target on {}",
                reference.len(),
                target.len()
            )));
        }
        if !(delta > S::zero()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        Ok(TypicalSetSpec {
            reference,
            target,
            delta,
            n,
        })
    }

    /// Inclusive count ranges `[lo_t, hi_t]` for the open window.
    ///
    /// Boundaries are resolved with a relative slack of `1e-12`, so a count
    /// sitting exactly `δ` away (in decimal terms) is excluded even when the
    /// floating-point difference rounds below `δ`.
    fn count_ranges(&self) -> Vec<(usize, usize)> {
        let nn = S::from_usize(self.n).unwrap();
        let slack = S::lit(1e-12).max(S::epsilon() * S::lit(16.0));
        let reach = self.delta * nn * (S::one() - slack);
        self.target
            .weights()
            .iter()
            .map(|&m| {
                let centre = m * nn;
                let lo = (centre - reach).floor() + S::one();
                let hi = (centre + reach).ceil() - S::one();
                let lo = lo.max(S::zero()).to_usize().unwrap_or(0);
                let hi = hi.min(nn).to_f64_lossy().max(-1.0);
                if hi < 0.0 {
                    (1, 0)
                } else {
                    (lo, hi as usize)
                }
            })
            .collect()
    }
}

/// `(1/N) log μ₀^{⊗N}(Δ(μ₁; N, δ))`, summed exactly over integer types.
///
/// Returns `−∞` when no type falls in the window or every type in it has
/// zero probability, and exactly `0` when the window is the whole space.
pub fn typical_set_log_prob<S: Scalar>(spec: &TypicalSetSpec<S>) -> Result<Extended<S>> {
    let d = spec.reference.len();
    let n = spec.n;
    if d > MAX_ALPHABET || n > MAX_N {
        return Err(Error::CapExceeded(format!(
            "d = {d}, N = {n} (limits d ≤ {MAX_ALPHABET}, N ≤ {MAX_N})"
        )));
    }
    let ranges = spec.count_ranges();
    if ranges.iter().all(|&(lo, hi)| lo == 0 && hi >= n) {
        return Ok(Extended::Finite(S::zero()));
    }
    if ranges.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(Extended::NegInfinity);
    }
    let visits: f64 = ranges[..d - 1]
        .iter()
        .map(|&(lo, hi)| (hi - lo + 1) as f64)
        .product();
    if visits > TYPE_BUDGET as f64 {
        return Err(Error::BudgetExceeded {
            budget: TYPE_BUDGET,
        });
    }
    let lf = LogFactorial::<S>::new(n);
    let log_mu: Vec<S> = spec.reference.weights().iter().map(|w| w.ln()).collect();
    let log_n_fact = lf.get(n);
    let term = |t: usize, k: usize| -> Option<S> {
        if k == 0 {
            Some(S::zero())
        } else if log_mu[t].is_finite() {
            Some(S::from_usize(k).unwrap() * log_mu[t] - lf.get(k))
        } else {
            None
        }
    };

    // Fixed-order merge over the first coordinate keeps the sum independent
    // of the thread count.
    let (lo0, hi0) = ranges[0];
    let partials: Vec<LogSumExp<S>> = (lo0..=hi0.min(n))
        .into_par_iter()
        .map(|k0| {
            let mut acc = LogSumExp::new();
            let Some(base) = term(0, k0) else {
                return acc;
            };
            let mut stack = vec![(1usize, n - k0, base)];
            while let Some((t, left, partial)) = stack.pop() {
                let (lo, hi) = ranges[t];
                if t == d - 1 {
                    if left >= lo && left <= hi {
                        if let Some(v) = term(t, left) {
                            acc.push(log_n_fact + partial + v);
                        }
                    }
                    continue;
                }
                for k in (lo..=hi.min(left)).rev() {
                    if let Some(v) = term(t, k) {
                        stack.push((t + 1, left - k, partial + v));
                    }
                }
            }
            acc
        })
        .collect();
    let mut acc = LogSumExp::new();
    for p in &partials {
        acc.merge(p);
    }
    let total = acc.value();
    if total == S::neg_infinity() {
        return Ok(Extended::NegInfinity);
    }
    // A probability never exceeds 1.
    Ok(Extended::Finite(
        (total / S::from_usize(n).unwrap()).min(S::zero()),
    ))
}

fn kl<S: Scalar>(p: &[S], q: &[S]) -> S {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > S::zero())
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

/// `−min { S(p ‖ μ₀) : p a pmf, |p − μ₁|_∞ ≤ δ }` over the closed window.
///
/// Two symbols use golden-section search on `p(t₁)`; larger alphabets use
/// the KKT form `p = clip(c·μ₀)` with `c` found by bisection.
pub fn ldp_rate<S: Scalar>(mu0: &Pmf<S>, mu1: &Pmf<S>, delta: S) -> Result<Extended<S>> {
    if mu0.len() != mu1.len() {
        return Err(Error::ShapeMismatch(format!(
            "reference on {} symbols, target on {}",
            mu0.len(),
            mu1.len()
        )));
    }
    if !(delta > S::zero()) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let q = mu0.weights();
    let lo: Vec<S> = mu1.weights().iter().map(|&m| (m - delta).max(S::zero())).collect();
    let hi: Vec<S> = mu1.weights().iter().map(|&m| (m + delta).min(S::one())).collect();
    let sum_lo: S = lo.iter().copied().sum();
    let sum_hi: S = hi.iter().copied().sum();
    let tol = S::prob_tolerance();
    if sum_lo > S::one() + tol || sum_hi < S::one() - tol {
        return Err(Error::InfeasibleWindow(format!(
            "box sums to [{sum_lo}, {sum_hi}], which misses 1"
        )));
    }
    if q.iter().zip(lo.iter().zip(&hi)).all(|(&m, (&l, &h))| l <= m && m <= h) {
        return Ok(Extended::Finite(S::zero()));
    }
    // Mass forced onto a symbol μ₀ never charges makes the divergence infinite.
    if q.iter().zip(&lo).any(|(&m, &l)| m == S::zero() && l > S::zero()) {
        return Ok(Extended::NegInfinity);
    }
    let value = if q.len() == 2 {
        let a = lo[0].max(S::one() - hi[1]);
        let b = hi[0].min(S::one() - lo[1]);
        let f = |x: S| kl(&[x, S::one() - x], q);
        golden_section(f, a, b)
    } else {
        kl(&kkt_projection(q, &lo, &hi), q)
    };
    Ok(Extended::Finite(-value))
}

fn golden_section<S: Scalar>(f: impl Fn(S) -> S, mut a: S, mut b: S) -> S {
    let inv_phi = S::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= S::epsilon() * S::lit(4.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // The minimizer may sit on an endpoint of the feasible segment.
    [f(a), f(b), fc, fd].into_iter().fold(S::infinity(), S::min)
}

/// `clip(c·q, lo, hi)` summing to one.
fn kkt_projection<S: Scalar>(q: &[S], lo: &[S], hi: &[S]) -> Vec<S> {
    let at = |c: S| -> Vec<S> {
        q.iter()
            .zip(lo.iter().zip(hi))
            .map(|(&m, (&l, &h))| (c * m).max(l).min(h))
            .collect()
    };
    let mass = |c: S| at(c).into_iter().sum::<S>();
    let mut a = S::one();
    let mut b = S::one();
    while mass(a) > S::one() && a > S::min_positive_value() {
        a /= S::lit(2.0);
    }
    while mass(b) < S::one() && b < S::max_value() / S::lit(4.0) {
        b *= S::lit(2.0);
    }
    for _ in 0..400 {
        let mid = (a + b) / S::lit(2.0);
        if mid <= a || mid >= b {
            break;
        }
        if mass(mid) < S::one() {
            a = mid;
        } else {
            b = mid;
        }
    }
    let p = at(b);
    // Push the remaining rounding onto the freest coordinate.
    let excess = p.iter().copied().sum::<S>() - S::one();
    let mut p = p;
    if let Some(k) = (0..p.len()).max_by(|&i, &j| {
        (hi[i] - p[i]).min(p[i] - lo[i])
            .partial_cmp(&(hi[j] - p[j]).min(p[j] - lo[j]))
            .unwrap()
    }) {
        p[k] -= excess;
    }
    p
}

/// One row of [`Lemma31Report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypicalRow<S> {
    pub n: usize,
    pub log_prob: Extended<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma31Report<S> {
    pub rows: Vec<TypicalRow<S>>,
    pub rate: Extended<S>,
    /// When `μ₀` is in the window: `|value| < 2 d log N / N + tol` at every N.
    pub clause_a: Option<bool>,
    /// When the window excludes `μ₀`: the value at the largest `N` is within
    /// `0.02` of the rate.
    pub clause_b: Option<bool>,
}

impl<S> Lemma31Report<S> {
    pub fn passed(&self) -> bool {
        self.clause_a.unwrap_or(true) && self.clause_b.unwrap_or(true)
    }
}

/// Tabulates [`typical_set_log_prob`] over `ns` and checks both limits.
pub fn lemma31_check<S: Scalar>(
    mu0: &Pmf<S>,
    mu1: &Pmf<S>,
    delta: S,
    ns: &[usize],
    tol: S,
) -> Result<Lemma31Report<S>> {
    if ns.is_empty() {
        return Err(Error::InvalidArgument("empty N list".into()));
    }
    let rate = ldp_rate(mu0, mu1, delta)?;
    let rows = ns
        .iter()
        .map(|&n| {
            let spec = TypicalSetSpec::new(mu0.clone(), mu1.clone(), delta, n)?;
            Ok(TypicalRow {
                n,
                log_prob: typical_set_log_prob(&spec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let d = S::from_usize(mu0.len()).unwrap();
    let inside = rate == Extended::Finite(S::zero());
    let clause_a = inside.then(|| {
        rows.iter().all(|r| {
            let nn = S::from_usize(r.n).unwrap();
            let bound = S::lit(2.0) * d * nn.ln() / nn + tol;
            matches!(r.log_prob, Extended::Finite(v) if v.abs() < bound)
        })
    });
    let clause_b = (!inside).then(|| {
        let last = rows.iter().max_by_key(|r| r.n).expect("nonempty");
        match (last.log_prob, rate) {
            (Extended::Finite(v), Extended::Finite(r)) => (v - r).abs() <= S::lit(RATE_AGREEMENT),
            (Extended::NegInfinity, Extended::NegInfinity) => true,
            _ => false,
        }
    });
    Ok(Lemma31Report {
        rows,
        rate,
        clause_a,
        clause_b,
    })
}
