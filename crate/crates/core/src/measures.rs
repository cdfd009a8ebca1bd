//! Probability measures on finite alphabets and their entropic functionals.
//!
//! Entropies are in nats. `0 log 0` is taken as `0`; a divergence that is
//! infinite is reported as [`Extended::PosInfinity`].

use std::collections::HashSet;

use ndarray::{ArrayD, IxDyn};

use crate::error::{Error, Result};
use crate::scalar::{Extended, Scalar};

/// Ordered list of distinct symbol labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<I, T>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::InvalidArgument("alphabet must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// The alphabet `t1, ..., td`.
    pub fn indexed(d: usize) -> Self {
        assert!(d >= 1, "alphabet size must be positive");
        Alphabet {
            symbols: (1..=d).map(|i| format!("t{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == label)
    }

    pub fn label(&self, index: usize) -> &str {
        &self.symbols[index]
    }
}

/// Anything that is a finite list of masses with a tensor shape.
pub trait Masses<S> {
    fn masses(&self) -> &[S];
    fn shape(&self) -> Vec<usize>;
}

fn check_masses<S: Scalar>(w: &[S]) -> Result<()> {
    let mut total = S::zero();
    for (i, &x) in w.iter().enumerate() {
        if !x.is_finite() || x < S::zero() {
            return Err(Error::InvalidMeasure(format!("entry {i} is {x}")));
        }
        total += x;
    }
    if (total - S::one()).abs() > S::prob_tolerance() {
        return Err(Error::InvalidMeasure(format!(
            "masses sum to {total}, not 1 (tolerance {})",
            S::prob_tolerance()
        )));
    }
    Ok(())
}

/// Probability vector on an alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf<S> {
    alphabet: Alphabet,
    weights: Vec<S>,
}

impl<S: Scalar> Pmf<S> {
    pub fn new(alphabet: Alphabet, weights: Vec<S>) -> Result<Self> {
        if weights.len() != alphabet.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for an alphabet of {} symbols",
                weights.len(),
                alphabet.len()
            )));
        }
        check_masses(&weights)?;
        Ok(Pmf { alphabet, weights })
    }

    /// Pmf on the indexed alphabet `t1..td`.
    pub fn from_weights(weights: Vec<S>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no weights".into()));
        }
        Self::new(Alphabet::indexed(weights.len()), weights)
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let d = alphabet.len();
        let w = S::one() / S::from_usize(d).unwrap();
        Pmf {
            alphabet,
            weights: vec![w; d],
        }
    }

    pub fn point_mass(alphabet: Alphabet, index: usize) -> Self {
        let mut weights = vec![S::zero(); alphabet.len()];
        weights[index] = S::one();
        Pmf { alphabet, weights }
    }

    pub(crate) fn from_parts_unchecked(alphabet: Alphabet, weights: Vec<S>) -> Self {
        Pmf { alphabet, weights }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ_t μ(t) f(t)`.
    pub fn expect(&self, f: &[S]) -> S {
        self.weights.iter().zip(f).map(|(&w, &x)| w * x).sum()
    }

    /// Symbols carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&t| self.weights[t] > S::zero()).collect()
    }
}

impl<S: Scalar> Masses<S> for Pmf<S> {
    fn masses(&self) -> &[S] {
        &self.weights
    }
    fn shape(&self) -> Vec<usize> {
        vec![self.weights.len()]
    }
}

/// Probability tensor on a product of alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf<S> {
    alphabets: Vec<Alphabet>,
    weights: ArrayD<S>,
}

impl<S: Scalar> JointPmf<S> {
    pub fn new(alphabets: Vec<Alphabet>, weights: ArrayD<S>) -> Result<Self> {
        if alphabets.is_empty() {
            return Err(Error::InvalidMeasure("need at least one coordinate".into()));
        }
        let shape: Vec<usize> = alphabets.iter().map(Alphabet::len).collect();
        if weights.shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "tensor shape {:?} vs alphabets {:?}",
                weights.shape(),
                shape
            )));
        }
        let weights = weights.as_standard_layout().into_owned();
        check_masses(weights.as_slice().expect("standard layout"))?;
        Ok(JointPmf { alphabets, weights })
    }

    /// Joint pmf over indexed alphabets, shape taken from the tensor.
    pub fn from_tensor(weights: ArrayD<S>) -> Result<Self> {
        let alphabets = weights.shape().iter().map(|&d| Alphabet::indexed(d)).collect();
        Self::new(alphabets, weights)
    }

    pub(crate) fn from_parts_unchecked(alphabets: Vec<Alphabet>, weights: ArrayD<S>) -> Self {
        JointPmf {
            alphabets,
            weights: weights.as_standard_layout().into_owned(),
        }
    }

    pub fn alphabets(&self) -> &[Alphabet] {
        &self.alphabets
    }

    pub fn weights(&self) -> &ArrayD<S> {
        &self.weights
    }

    /// Number of coordinates `n`.
    pub fn arity(&self) -> usize {
        self.alphabets.len()
    }

    /// `Σ_w μ(w) f(w)` for a tensor of the same shape.
    pub fn expect(&self, f: &ArrayD<S>) -> S {
        debug_assert_eq!(f.shape(), self.weights.shape());
        self.weights.iter().zip(f.iter()).map(|(&w, &x)| w * x).sum()
    }
}

impl<S: Scalar> Masses<S> for JointPmf<S> {
    fn masses(&self) -> &[S] {
        self.weights.as_slice().expect("standard layout")
    }
    fn shape(&self) -> Vec<usize> {
        self.weights.shape().to_vec()
    }
}

/// `-Σ μ log μ` in nats.
pub fn shannon_entropy<S: Scalar, M: Masses<S>>(mu: &M) -> S {
    mu.masses()
        .iter()
        .filter(|&&p| p > S::zero())
        .map(|&p| -p * p.ln())
        .sum()
}

/// `Σ μ log(μ/ν)`, `+inf` when μ charges a point where ν vanishes.
pub fn relative_entropy<S: Scalar, M: Masses<S>>(mu: &M, nu: &M) -> Result<Extended<S>> {
    if mu.shape() != nu.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            mu.shape(),
            nu.shape()
        )));
    }
    let mut acc = S::zero();
    for (&p, &q) in mu.masses().iter().zip(nu.masses()) {
        if p > S::zero() {
            if q <= S::zero() {
                return Ok(Extended::PosInfinity);
            }
            acc += p * (p / q).ln();
        }
    }
    // Rounding can push an exact zero slightly negative.
    Ok(Extended::Finite(acc.max(S::zero())))
}

/// Total-variation distance `½ Σ |μ − ν|`.
pub fn tv_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    let two = S::lit(2.0);
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum::<S>() / two
}

/// The `i`-th marginal of a tensor: sum over every other axis.
pub(crate) fn axis_marginal<S: Scalar>(t: &ArrayD<S>, i: usize) -> Vec<S> {
    let mut out = vec![S::zero(); t.shape()[i]];
    for (idx, &x) in t.indexed_iter() {
        out[idx[i]] += x;
    }
    out
}

/// One-dimensional marginals of a joint pmf.
pub fn marginals<S: Scalar>(mu: &JointPmf<S>) -> Vec<Pmf<S>> {
    (0..mu.arity())
        .map(|i| Pmf::from_parts_unchecked(mu.alphabets[i].clone(), axis_marginal(&mu.weights, i)))
        .collect()
}

/// Product measure `μ₁ ⊗ ... ⊗ μₙ`.
pub fn product_measure<S: Scalar>(factors: &[Pmf<S>]) -> Result<JointPmf<S>> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("product of zero factors".into()));
    }
    let shape: Vec<usize> = factors.iter().map(Pmf::len).collect();
    let weights = ArrayD::from_shape_fn(IxDyn(&shape), |idx| {
        factors
            .iter()
            .enumerate()
            .map(|(i, f)| f.weights[idx[i]])
            .fold(S::one(), |a, b| a * b)
    });
    Ok(JointPmf {
        alphabets: factors.iter().map(|f| f.alphabet.clone()).collect(),
        weights,
    })
}

/// Mutual information `S(μ ‖ μ₁ ⊗ ... ⊗ μₙ)`, the relative entropy of a joint
/// pmf against the product of its marginals.
pub fn mutual_information<S: Scalar>(mu: &JointPmf<S>) -> S {
    let prod = product_measure(&marginals(mu)).expect("marginals are non-empty");
    // μ ≪ ⊗μᵢ always holds, so the divergence is finite.
    relative_entropy(mu, &prod)
        .expect("shapes agree")
        .expect_finite("mutual information")
}

/// Mutual information through `-S(μ) + Σ S(μᵢ)`.
pub fn mutual_information_by_entropies<S: Scalar>(mu: &JointPmf<S>) -> S {
    let marg: S = marginals(mu).iter().map(shannon_entropy).sum();
    marg - shannon_entropy(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn pmf(w: &[f64]) -> Pmf<f64> {
        Pmf::from_weights(w.to_vec()).unwrap()
    }

    fn joint(t: ndarray::Array2<f64>) -> JointPmf<f64> {
        JointPmf::from_tensor(t.into_dyn()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let u = pmf(&[0.25; 4]);
        assert!((shannon_entropy(&u) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(shannon_entropy(&pmf(&[0.0, 1.0, 0.0])), 0.0);
        assert!((shannon_entropy(&pmf(&[0.8, 0.2])) - 0.500402).abs() < 5e-7);
    }

    #[test]
    fn relative_entropy_examples() {
        let a = pmf(&[0.3, 0.7]);
        assert_eq!(relative_entropy(&a, &a).unwrap(), Extended::Finite(0.0));
        let r = relative_entropy(&pmf(&[1.0, 0.0]), &pmf(&[0.5, 0.5])).unwrap();
        assert!((r.finite().unwrap() - 2f64.ln()).abs() < 1e-15);
        let inf = relative_entropy(&pmf(&[0.5, 0.5]), &pmf(&[1.0, 0.0])).unwrap();
        assert_eq!(inf, Extended::PosInfinity);
    }

    #[test]
    fn relative_entropy_rejects_shape_mismatch() {
        let err = relative_entropy(&pmf(&[0.5, 0.5]), &pmf(&[0.2, 0.3, 0.5]));
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn rejects_unnormalized_input() {
        assert!(Pmf::from_weights(vec![0.5, 0.6]).is_err());
        assert!(Pmf::from_weights(vec![1.5, -0.5]).is_err());
        assert!(Pmf::from_weights(vec![0.5, 0.5 + 1e-10]).is_err());
        assert!(Pmf::from_weights(vec![0.5, 0.5 + 1e-13]).is_ok());
    }

    #[test]
    fn marginal_examples() {
        let mu = joint(array![[0.4, 0.1], [0.1, 0.4]]);
        let m = marginals(&mu);
        assert_eq!(m[0].weights(), &[0.5, 0.5]);
        assert_eq!(m[1].weights(), &[0.5, 0.5]);

        let single = JointPmf::from_tensor(ndarray::arr1(&[0.2, 0.8]).into_dyn()).unwrap();
        assert_eq!(marginals(&single)[0].weights(), &[0.2, 0.8]);
    }

    #[test]
    fn product_examples() {
        let p = product_measure(&[pmf(&[0.5, 0.5]), pmf(&[0.5, 0.5])]).unwrap();
        assert!(p.weights().iter().all(|&x| x == 0.25));
        let p = product_measure(&[pmf(&[0.8, 0.2]), pmf(&[0.5, 0.5])]).unwrap();
        let expected = array![[0.4, 0.4], [0.1, 0.1]].into_dyn();
        for (a, b) in p.weights().iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-16);
        }
        let one = product_measure(&[pmf(&[0.3, 0.7])]).unwrap();
        assert_eq!(one.masses(), &[0.3, 0.7]);
    }

    #[test]
    fn mutual_information_examples() {
        let prod = product_measure(&[pmf(&[0.3, 0.7]), pmf(&[0.6, 0.4])]).unwrap();
        assert!(mutual_information(&prod).abs() < 1e-15);

        // Oracle: direct KL sum against the uniform product.
        let mu = joint(array![[0.4, 0.1], [0.1, 0.4]]);
        let oracle = 2.0 * 0.4 * (0.4f64 / 0.25).ln() + 2.0 * 0.1 * (0.1f64 / 0.25).ln();
        assert!((mutual_information(&mu) - oracle).abs() < 1e-15);
        assert!((oracle - 0.192745).abs() < 5e-7);
        assert!((mutual_information_by_entropies(&mu) - oracle).abs() < 1e-12);

        let bit = joint(array![[0.5, 0.0], [0.0, 0.5]]);
        assert!((mutual_information(&bit) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let mu = JointPmf::<f32>::from_tensor(array![[0.4f32, 0.1], [0.1, 0.4]].into_dyn()).unwrap();
        assert!((mutual_information(&mu) - 0.192745).abs() < 1e-5);
    }
}
