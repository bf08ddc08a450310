//! Spectral analysis and limit-theorem verification for finite-state Markov
//! additive processes `(X_n, Y_n)`.
//!
//! * [`chain`]: stationary laws, `L²(π)` norms and mixing bounds.
//! * [`model`]: increment laws, exact moments, variance and bias series,
//!   lattice detection, continuous-time models.
//! * [`fourier`]: Fourier operators, the dominant eigenvalue branch and the
//!   characteristic-function expansion.
//! * [`montecarlo`]: reproducible simulation.
//! * [`limit_checks`]: CLT, Berry–Esseen, Edgeworth, LLT and ρ-mixing checks.
//! * [`mestim`]: M-estimation and its Berry–Esseen check.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod error;
pub mod fixtures;
pub mod fourier;
pub mod io;
pub mod limit_checks;
pub mod linalg;
pub mod mestim;
pub mod model;
pub mod montecarlo;
pub mod stats;

pub use chain::StochasticKernel;
pub use error::{Condition, Error, Result};
pub use model::{CtMapSpec, IncrementLaw, MapSpec};
