use thiserror::Error;

use crate::quadrature::QuadratureError;

/// Errors raised by kernel evaluation, analysis and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported target set: {0}")]
    UnsupportedTarget(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(#[from] QuadratureError),

    #[error("density requested at t = 0; the law is a point mass there")]
    SingularityAtOrigin,

    #[error("argument outside the state space: {0}")]
    DomainError(String),

    #[error("kernel exposes no transition density")]
    DensityUnavailable,

    #[error("moment of order {k} is unavailable: {reason}")]
    MomentUnavailable { k: u32, reason: String },

    #[error("growth rate eta = {eta} must be strictly below the restart rate lambda = {lambda}")]
    EtaNotLessThanLambda { eta: f64, lambda: f64 },

    #[error("window [{lo}, {hi}] captures reference mass {mass}, below the required {required}")]
    WindowTooNarrow {
        lo: f64,
        hi: f64,
        mass: f64,
        required: f64,
    },

    #[error("state {0} is not a state of this chain")]
    UnknownState(f64),

    #[error("invalid rate matrix at row {row}{}: {reason}", col.map(|c| format!(", col {c}")).unwrap_or_default())]
    InvalidRateMatrix {
        row: usize,
        col: Option<usize>,
        reason: String,
    },

    #[error("matrix exponential overflow: {0}")]
    MatrixOverflow(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("state spaces differ: {0}")]
    StateSpaceMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Non-fatal diagnostics attached to reports.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Sample kurtosis or a failed finiteness predicate indicates heavy tails.
    MomentUnstable { reason: String },
    /// The absolute-moment condition justifying the order swap of integrals
    /// could not be certified.
    FubiniUnverified { reason: String },
}
