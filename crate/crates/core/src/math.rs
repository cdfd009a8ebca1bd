//! Log-domain arithmetic: log-sum-exp and exact log-factorials.

use crate::scalar::Scalar;

/// `log Σ exp(x)` with max shift. Returns `-inf` for an empty slice or when
/// every term is `-inf`.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let m = xs.iter().copied().fold(S::neg_infinity(), S::max);
    if m == S::neg_infinity() {
        return m;
    }
    let s: S = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Streaming log-sum-exp accumulator.
///
/// Partial accumulators over disjoint chunks can be merged; merging in a
/// fixed order makes the result independent of how work was scheduled.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp<S> {
    max: S,
    scaled: S,
}

impl<S: Scalar> Default for LogSumExp<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> LogSumExp<S> {
    pub fn new() -> Self {
        LogSumExp {
            max: S::neg_infinity(),
            scaled: S::zero(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: S) {
        if x == S::neg_infinity() {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + S::one();
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.scaled == S::zero() {
            return;
        }
        if self.scaled == S::zero() {
            *self = *other;
            return;
        }
        if other.max > self.max {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        } else {
            self.scaled += other.scaled * (other.max - self.max).exp();
        }
    }

    pub fn value(&self) -> S {
        if self.scaled == S::zero() {
            S::neg_infinity()
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Table of `log k!` for `k = 0..=n`, built by cumulative sums of `log k`.
#[derive(Debug, Clone)]
pub struct LogFactorial<S> {
    table: Vec<S>,
}

impl<S: Scalar> LogFactorial<S> {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        table.push(S::zero());
        let mut acc = 0.0f64;
        for k in 1..=n {
            acc += (k as f64).ln();
            table.push(S::lit(acc));
        }
        LogFactorial { table }
    }

    pub fn max_n(&self) -> usize {
        self.table.len() - 1
    }

    #[inline]
    pub fn get(&self, k: usize) -> S {
        self.table[k]
    }

    /// `log (n! / Π k_i!)`.
    pub fn log_multinomial(&self, counts: &[usize]) -> S {
        let n: usize = counts.iter().sum();
        let mut out = self.get(n);
        for &k in counts {
            out -= self.get(k);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_on_small_inputs() {
        let xs = [0.1f64, -2.0, 3.5, 0.0];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_survives_large_arguments() {
        let xs = [1000.0f64, 1000.0];
        assert!((log_sum_exp(&xs) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn streaming_and_merge_agree_with_two_pass() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 * 0.7 - 3.0).collect();
        let mut acc = LogSumExp::new();
        xs.iter().for_each(|&x| acc.push(x));
        let mut a = LogSumExp::new();
        let mut b = LogSumExp::new();
        xs[..20].iter().for_each(|&x| a.push(x));
        xs[20..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        let reference = log_sum_exp(&xs);
        assert!((acc.value() - reference).abs() < 1e-13);
        assert!((a.value() - reference).abs() < 1e-13);
    }

    #[test]
    fn log_factorial_is_exact_for_small_n() {
        let lf = LogFactorial::<f64>::new(10);
        assert_eq!(lf.get(0), 0.0);
        assert_eq!(lf.get(1), 0.0);
        assert!((lf.get(5) - 120f64.ln()).abs() < 1e-14);
        assert!((lf.get(10) - 3628800f64.ln()).abs() < 1e-13);
        assert!((lf.log_multinomial(&[2, 1]) - 3f64.ln()).abs() < 1e-14);
    }
}
