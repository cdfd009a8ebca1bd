//! Discrete pressure, Gibbs measures and marginal potentials.

use ndarray::{ArrayD, Dimension, IxDyn};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, LogSumExp};
use crate::measures::{relative_entropy, shannon_entropy, Alphabet, JointPmf, Masses, Pmf};
use crate::scalar::Scalar;

/// Real function on a product of finite alphabets, stored as a dense tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTensor<S> {
    alphabets: Vec<Alphabet>,
    values: ArrayD<S>,
}

impl<S: Scalar> PotentialTensor<S> {
    pub fn new(alphabets: Vec<Alphabet>, values: ArrayD<S>) -> Result<Self> {
        if alphabets.is_empty() {
            return Err(Error::InvalidPotential("need at least one coordinate".into()));
        }
        let shape: Vec<usize> = alphabets.iter().map(Alphabet::len).collect();
        if values.shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "potential shape {:?} vs alphabets {:?}",
                values.shape(),
                shape
            )));
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidPotential(format!("non-finite entry {bad}")));
        }
        Ok(PotentialTensor {
            alphabets,
            values: values.as_standard_layout().into_owned(),
        })
    }

    pub fn from_tensor(values: ArrayD<S>) -> Result<Self> {
        let alphabets = values.shape().iter().map(|&d| Alphabet::indexed(d)).collect();
        Self::new(alphabets, values)
    }

    /// `f(w)` for every cell of the product of the given alphabet sizes.
    pub fn from_fn(shape: &[usize], f: impl FnMut(&[usize]) -> S) -> Result<Self> {
        let mut f = f;
        let values = ArrayD::from_shape_fn(IxDyn(shape), |idx| f(idx.slice()));
        Self::from_tensor(values)
    }

    pub fn constant(shape: &[usize], c: S) -> Self {
        Self::from_fn(shape, |_| c).expect("constant potential is valid")
    }

    /// `β · 1{w₁ = w₂ = ... = wₙ}`.
    pub fn diagonal(d: usize, n: usize, beta: S) -> Self {
        Self::from_fn(&vec![d; n], |w| {
            if w.iter().all(|&x| x == w[0]) {
                beta
            } else {
                S::zero()
            }
        })
        .expect("diagonal potential is valid")
    }

    /// `h(w) = Σᵢ gᵢ(wᵢ)`.
    pub fn separable(parts: &[Vec<S>]) -> Result<Self> {
        let shape: Vec<usize> = parts.iter().map(Vec::len).collect();
        Self::from_fn(&shape, |w| {
            w.iter().enumerate().map(|(i, &t)| parts[i][t]).sum()
        })
    }

    /// `h¹(w₁..w_m) + h²(w_{m+1}..wₙ)`.
    pub fn direct_sum(first: &Self, second: &Self) -> Self {
        let m = first.arity();
        let mut shape = first.shape();
        shape.extend(second.shape());
        let values = ArrayD::from_shape_fn(IxDyn(&shape), |idx| {
            let idx = idx.slice();
            first.values[IxDyn(&idx[..m])] + second.values[IxDyn(&idx[m..])]
        });
        let mut alphabets = first.alphabets.clone();
        alphabets.extend(second.alphabets.iter().cloned());
        PotentialTensor { alphabets, values }
    }

    pub fn alphabets(&self) -> &[Alphabet] {
        &self.alphabets
    }

    pub fn values(&self) -> &ArrayD<S> {
        &self.values
    }

    pub fn arity(&self) -> usize {
        self.alphabets.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.values.shape().to_vec()
    }

    #[inline]
    pub fn at(&self, w: &[usize]) -> S {
        self.values[IxDyn(w)]
    }

    pub fn as_slice(&self) -> &[S] {
        self.values.as_slice().expect("standard layout")
    }

    /// Sup-norm `max |h(w)|`.
    pub fn sup_norm(&self) -> S {
        self.values.iter().fold(S::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn min_value(&self) -> S {
        self.values.iter().copied().fold(S::infinity(), S::min)
    }

    pub fn max_value(&self) -> S {
        self.values.iter().copied().fold(S::neg_infinity(), S::max)
    }

    /// `Some(c)` when every entry equals `c`.
    pub fn constant_value(&self) -> Option<S> {
        let first = *self.values.iter().next()?;
        self.values.iter().all(|&x| x == first).then_some(first)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        PotentialTensor {
            alphabets: self.alphabets.clone(),
            values: self.values.mapv(f),
        }
    }

    /// Entrywise `a·self + b·other`.
    pub fn combine(&self, other: &Self, a: S, b: S) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch("potentials differ in shape".into()));
        }
        let values = ndarray::Zip::from(&self.values)
            .and(&other.values)
            .map_collect(|&x, &y| a * x + b * y);
        Ok(PotentialTensor {
            alphabets: self.alphabets.clone(),
            values,
        })
    }

    /// `self − ⊕gᵢ` for one-dimensional parts `gᵢ`.
    pub fn minus_separable(&self, parts: &[Vec<S>]) -> Result<Self> {
        let g = Self::separable(parts)?;
        self.combine(&g, S::one(), -S::one())
    }
}

/// `P(h) = log Σ_w e^{h(w)}`.
pub fn pressure<S: Scalar>(h: &PotentialTensor<S>) -> S {
    log_sum_exp(h.as_slice())
}

/// The Gibbs measure `μ_h = e^h / Z_h`.
pub fn gibbs_measure<S: Scalar>(h: &PotentialTensor<S>) -> JointPmf<S> {
    let p = pressure(h);
    JointPmf::from_parts_unchecked(h.alphabets.clone(), h.values.mapv(|x| (x - p).exp()))
}

/// `hᵢ(x) = log Σ_{w: wᵢ = x} e^{h(w)}`, without subtracting `log Z_h`.
///
/// `i` is zero-based.
pub fn marginal_potential<S: Scalar>(h: &PotentialTensor<S>, i: usize) -> Result<Vec<S>> {
    if i >= h.arity() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: h.arity(),
        });
    }
    let mut acc = vec![LogSumExp::new(); h.shape()[i]];
    for (idx, &x) in h.values.indexed_iter() {
        acc[idx[i]].push(x);
    }
    Ok(acc.iter().map(LogSumExp::value).collect())
}

/// Gibbs measure of a one-dimensional potential.
pub fn gibbs_pmf<S: Scalar>(alphabet: Alphabet, h: &[S]) -> Pmf<S> {
    let z = log_sum_exp(h);
    Pmf::from_parts_unchecked(alphabet, h.iter().map(|&x| (x - z).exp()).collect())
}

/// `P(h) − μ(h) − S(μ)`, the slack in the Gibbs variational principle.
pub fn variational_gap<S: Scalar>(h: &PotentialTensor<S>, mu: &JointPmf<S>) -> Result<S> {
    if h.shape() != mu.shape() {
        return Err(Error::ShapeMismatch(format!(
            "potential {:?} vs measure {:?}",
            h.shape(),
            mu.shape()
        )));
    }
    Ok(pressure(h) - mu.expect(&h.values) - shannon_entropy(mu))
}

/// `S(μ ‖ μ_h)`; equals [`variational_gap`] analytically.
pub fn gibbs_divergence<S: Scalar>(h: &PotentialTensor<S>, mu: &JointPmf<S>) -> Result<S> {
    let g = gibbs_measure(h);
    Ok(relative_entropy(mu, &g)?.expect_finite("Gibbs measure has full support"))
}
