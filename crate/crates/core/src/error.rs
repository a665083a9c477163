use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Domain errors raised by the channel, measurement and tomography layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Bloch vector norm {norm} lies outside the unit ball")]
    BlochOutOfBall { norm: f64 },

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace {0} differs from 1")]
    BadTrace(f64),

    #[error("matrix is not positive semidefinite (most negative eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("invalid Pauli mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid duty-cycle schedule: {0}")]
    InvalidSchedule(String),

    #[error("expected {expected} commanded retardances, got {got}")]
    RetardanceCount { expected: usize, got: usize },

    #[error("probe input Bloch vectors are linearly dependent (|det| = {0:e})")]
    DependentProbeInputs(f64),

    #[error("measurement settings are not tomographically complete (rank {0} < 16)")]
    IncompleteSettings(usize),

    #[error("invalid count set: {0}")]
    InvalidCounts(String),

    #[error("input correlation matrix is ill-conditioned (condition number {condition:e}, cap {cap:e})")]
    IllConditioned { condition: f64, cap: f64 },

    #[error("face vertices are affinely dependent")]
    DegenerateFace,

    #[error("line fit needs at least two distinct points")]
    DegenerateLine,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
