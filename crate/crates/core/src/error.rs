use thiserror::Error;

pub type Result<T> = std::result::Result<T, WvaError>;

/// Errors raised by the simulator.
///
/// The variants are grouped so a front end can map them onto exit codes:
/// [`WvaError::is_convergence`] marks numeric failures, everything else is a
/// precondition violation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WvaError {
    #[error("photon number must be at least 1 (got {0})")]
    ZeroPhotons(usize),

    #[error("photon number {got} exceeds the supported maximum {max}")]
    TooManyPhotons { got: usize, max: usize },

    #[error("state is not normalized: sum of |amplitude|^2 = {0}")]
    NotNormalized(f64),

    #[error("bitstring {bits:?} does not describe {n_photons} photons")]
    InvalidBits { bits: String, n_photons: usize },

    #[error("photon number mismatch: {left} vs {right}")]
    PhotonMismatch { left: usize, right: usize },

    #[error("pre- and postselected states are orthogonal (|<f|i>| = {overlap:e})")]
    ZeroOverlap { overlap: f64 },

    #[error("coupling observable eigenvalues must differ (a_H = a_V = {0})")]
    DegenerateObservable(f64),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("momentum vector has length {got}, meter describes {expected} photons")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("grid too coarse: spacing {spacing:e} exceeds {limit:e}")]
    GridTooCoarse { spacing: f64, limit: f64 },

    #[error("grids differ and cannot be compared")]
    GridMismatch,

    #[error("state carries no probability (norm {0:e})")]
    DegenerateState(f64),

    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },
}

impl WvaError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        WvaError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for numeric non-convergence, as opposed to bad inputs.
    pub fn is_convergence(&self) -> bool {
        matches!(self, WvaError::NoConvergence { .. })
    }
}
