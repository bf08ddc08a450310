use std::fmt;

use thiserror::Error;

/// Regularity conditions checked when building an M-estimation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Condition {
    V1,
    V2,
    V4,
    V5,
    UniformGap,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::V1 => "V1",
            Condition::V2 => "V2",
            Condition::V4 => "V4",
            Condition::V5 => "V5",
            Condition::UniformGap => "M",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row} is not a probability vector (sum = {sum}, min = {min})")]
    NotStochastic { row: usize, sum: f64, min: f64 },

    #[error("kernel has {classes} closed communicating classes; stationary law is not unique")]
    NonIrreducible { classes: usize },

    #[error("supplied stationary vector differs from the solved one by {max_diff:e}")]
    StationaryMismatch { max_diff: f64 },

    #[error("state {state} has zero stationary mass but the operator acts on it")]
    ZeroMassState { state: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid increment law on edge ({from},{to}): {reason}")]
    InvalidIncrement { from: usize, to: usize, reason: String },

    #[error("missing increment law on supported edge ({from},{to})")]
    MissingIncrement { from: usize, to: usize },

    #[error("no L2 contraction of the centered powers was found; series may diverge")]
    GapAbsent,

    #[error("moment of order {order} is not available for this model")]
    MomentUndefined { order: usize },

    #[error("dominant eigenvalue branch collides with the rest of the spectrum at zeta = {zeta:?} (separation {separation:e})")]
    BranchCollision { zeta: Vec<f64>, separation: f64 },

    #[error("an eigenvalue lies within {distance:e} of the integration contour")]
    SingularResolvent { distance: f64 },

    #[error("initial distribution charges state {state} which has zero stationary mass")]
    UnsupportedInitial { state: usize },

    #[error("asymptotic variance {sigma2:e} is degenerate; the limit is a Dirac mass")]
    DegenerateVariance { sigma2: f64 },

    #[error("model is lattice; the check requires the nonlattice condition")]
    LatticeSpec,

    #[error("condition {condition} violated at theta index {theta}: {detail}")]
    ConditionViolated { condition: Condition, theta: usize, detail: String },

    #[error("first-order condition has no sign change inside the parameter domain")]
    NoInteriorRoot,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case tag for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotStochastic { .. } => "not_stochastic",
            Error::NonIrreducible { .. } => "non_irreducible",
            Error::StationaryMismatch { .. } => "stationary_mismatch",
            Error::ZeroMassState { .. } => "zero_mass_state",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidGenerator(_) => "invalid_generator",
            Error::InvalidIncrement { .. } => "invalid_increment",
            Error::MissingIncrement { .. } => "missing_increment",
            Error::GapAbsent => "gap_absent",
            Error::MomentUndefined { .. } => "moment_undefined",
            Error::BranchCollision { .. } => "branch_collision",
            Error::SingularResolvent { .. } => "singular_resolvent",
            Error::UnsupportedInitial { .. } => "unsupported_initial",
            Error::DegenerateVariance { .. } => "degenerate_variance",
            Error::LatticeSpec => "lattice_spec",
            Error::ConditionViolated { .. } => "condition_violated",
            Error::NoInteriorRoot => "no_interior_root",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::UnknownFixture(_) => "unknown_fixture",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
