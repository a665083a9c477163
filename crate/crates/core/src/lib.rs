//! Simulation and characterization of anisotropic depolarizing qubit channels.
//!
//! The crate covers the full chain: unital channels synthesized as
//! time-averaged mixtures of polarization rotations ([`channel`]),
//! Poisson-noisy two-photon coincidence data ([`measurement`]),
//! maximum-likelihood state reconstruction and extraction of the Bloch map
//! Λ from an entangled probe ([`tomography`]), and the singular-value
//! analysis of sweeps over the duty cycle ([`analysis`]).

pub mod analysis;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod measurement;
pub mod optimize;
pub mod qubit;
pub mod tomography;

pub use channel::{
    canonical_triplet, tetrahedron_check, DutyCycleSchedule, EpcModel, PauliMixture, Rotation3, ScheduleSegment,
    SignedSvd, Squeezer, TetrahedronCheck, UnitalChannel,
};
pub use error::{Error, Result};
pub use measurement::{
    classical_probe, coincidence_probability, expected_counts, standard_settings, CoincidenceRecord, CountSet, MeasurementSetting,
    PolarizationKet,
};
pub use qubit::{BlochVector, PauliBasis, QubitState, TwoQubitState, EPS};
pub use tomography::{
    extract_channel, extract_lambda_t, jamiolkowski_state, mle_reconstruct, CholeskyParams, MleOptions, MleResult,
    ProcessResult,
};
