//! Mutual pressure of potentials with respect to fixed marginals.
//!
//! The discrete core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the continuous bridge and the CLI
//! use.

pub mod continuous;
pub mod error;
pub mod estimate;
pub mod math;
pub mod measures;
pub mod microstates;
pub mod mutual_pressure;
pub mod pressure;
pub mod rng;
pub mod sanov;
pub mod scalar;

pub use error::{Error, Result};
pub use estimate::{Method, MutualPressureEstimate};
pub use measures::{
    marginals, mutual_information, product_measure, relative_entropy, shannon_entropy,
    tv_distance, Alphabet, JointPmf, Masses, Pmf,
};
pub use microstates::{
    approximating_sample, brute_force_value, coset_log_count, enumerate_contingency,
    finite_n_value, kappa, mc_value, ContingencyTensor, PermutationTuple, SortedSample,
    TypeCounts,
};
pub use mutual_pressure::{
    duality_report, equilibrium_check, i_sym, mutual_pressure_limit, sinkhorn_coupling,
    verify_legendre, DualityReport, EquilibriumReport,
};
pub use pressure::{gibbs_measure, marginal_potential, pressure, variational_gap, PotentialTensor};
pub use sanov::{ldp_rate, lemma31_check, typical_set_log_prob, TypicalSetSpec};
pub use scalar::{Extended, Scalar};

pub type Pmf64 = Pmf<f64>;
pub type JointPmf64 = JointPmf<f64>;
pub type Potential64 = PotentialTensor<f64>;
pub type Estimate64 = MutualPressureEstimate<f64>;
pub type DualityReport64 = DualityReport<f64>;
pub type TypicalSetSpec64 = TypicalSetSpec<f64>;
