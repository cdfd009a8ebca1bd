//! Scalar abstraction shared by the discrete machinery.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar: `f32` or `f64`.
///
/// `prob_tolerance` is the slack allowed when checking that a probability
/// vector sums to one. Inputs outside it are rejected, never renormalized.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    fn prob_tolerance() -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    #[inline]
    fn prob_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    #[inline]
    fn prob_tolerance() -> Self {
        1e-5
    }
}

/// A real number extended with explicit infinities.
///
/// Divergences and log-probabilities of empty events are reported through
/// this type so that no IEEE infinity reaches downstream arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Extended<S> {
    Finite(S),
    PosInfinity,
    NegInfinity,
}

impl<S: Scalar> Extended<S> {
    pub fn finite(self) -> Option<S> {
        match self {
            Extended::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// Unwraps a finite value, panicking on an infinite sentinel.
    pub fn expect_finite(self, what: &str) -> S {
        match self {
            Extended::Finite(x) => x,
            other => panic!("{what}: expected a finite value, got {other:?}"),
        }
    }

    /// Maps into the IEEE representation. Meant for display only.
    pub fn to_f64_lossy(self) -> f64 {
        match self {
            Extended::Finite(x) => x.to_f64_lossy(),
            Extended::PosInfinity => f64::INFINITY,
            Extended::NegInfinity => f64::NEG_INFINITY,
        }
    }
}

impl<S: Scalar> Display for Extended<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extended::Finite(x) => write!(f, "{x}"),
            Extended::PosInfinity => write!(f, "+inf"),
            Extended::NegInfinity => write!(f, "-inf"),
        }
    }
}
