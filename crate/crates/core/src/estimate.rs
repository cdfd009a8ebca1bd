use serde::Serialize;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FiniteNExact,
    MonteCarlo,
    LimitDual,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::FiniteNExact => "finite-n-exact",
            Method::MonteCarlo => "monte-carlo",
            Method::LimitDual => "limit-dual",
        })
    }
}

/// A mutual pressure value with the diagnostics of the route that produced it.
///
/// For the limit-dual route `marginal_residual` is the largest total-variation
/// error between a marginal of the optimal coupling and its target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MutualPressureEstimate<S> {
    pub value: S,
    pub method: Method,
    pub sample_size: Option<usize>,
    pub iterations: Option<usize>,
    pub marginal_residual: Option<S>,
    pub std_error: Option<S>,
    pub mc_samples: Option<usize>,
    pub tensors_visited: Option<u64>,
}

impl<S: Scalar> MutualPressureEstimate<S> {
    pub(crate) fn bare(value: S, method: Method) -> Self {
        MutualPressureEstimate {
            value,
            method,
            sample_size: None,
            iterations: None,
            marginal_residual: None,
            std_error: None,
            mc_samples: None,
            tensors_visited: None,
        }
    }
}
