//! Wideband terahertz array processing under beam-squint and gain-phase
//! mismatch.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! parts of the toolkit:
//!
//! - [`array`]: subcarrier grids, steering vectors, the squint transform,
//!   gain-phase mismatch (GPM) vectors and subarrayed combiners.
//! - [`sim`]: ground-truth scenarios and stacked echo observations.
//! - [`estimator`]: the NEAT-MUSIC alternating DOA / GPM estimator together
//!   with the uncorrected and partially informed MUSIC baselines.
//! - [`crb`]: Cramér-Rao bounds for the joint DOA / squint / GPM model.
//! - [`metrics`]: error pairing, RMSE and gauge-aligned GPM errors.
//!
//! Directions are carried as spatial directions `theta = sin(angle)` in
//! `[-1, 1]` everywhere; conversion to physical degrees is done by
//! [`metrics::to_degrees`] at the reporting boundary.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

use alloc::string::String;

pub use nalgebra::{Complex, DMatrix, DVector};

pub mod array;
pub mod config;
pub mod crb;
pub mod estimator;
mod linalg;
pub mod metrics;
pub mod sim;

pub use array::{
    beam_squint_delta, build_combiner, sample_gpm, squint_transform, steering_vector,
    subcarrier_grid, Combiner, CombinerKind, GpmVector, SubcarrierGrid,
};
pub use config::SystemConfig;
pub use crb::{
    crb_fim_inverse, crb_closed_form, fisher_information, steering_derivatives, CrbMethod,
    CrbOptions, CrbResult, DerivativeForm, FisherInformation, SteeringDerivatives, UnknownVector,
};
pub use estimator::{
    direction_grid, estimate_gpm, find_peaks, music_spectrum, neat_music, noise_subspace,
    sample_covariance, corrected_spectrum, Diagnostic, EstimationResult, EstimatorMode,
    GpmSolveMode, ModeTag, NeatOptions, NoiseSubspace, Spectrum, SpectrumMethod,
};
pub use sim::{
    array_gain_profile, generate_probing, sample_scenario, simulate_echo, ObservationSet,
    Scenario,
};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Double precision complex scalar.
pub type C64 = Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = DVector<C64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("spatial direction {0} is outside [-1, 1]")]
    DirectionOutOfRange(f64),

    #[error("distortion coefficient must be positive and finite, got {0}")]
    InvalidEta(f64),

    #[error("{antennas} antennas cannot be split into subarrays of {rf_chains} RF chains")]
    IndivisibleSubarray { antennas: usize, rf_chains: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("could not place {targets} targets at separation {min_separation} after {attempts} attempts")]
    SeparationUnsatisfied {
        targets: usize,
        min_separation: f64,
        attempts: usize,
    },

    #[error("model is not identifiable: {0}")]
    NotIdentifiable(String),

    #[error("covariance of subcarrier {subcarrier} is singular (noise variance must be positive)")]
    SingularCovariance { subcarrier: usize },

    #[error("known GPM mode requires one GPM vector per subcarrier")]
    MissingKnownGpm,

    #[error("Fisher information with {0} real parameters exceeds the dense assembly limit")]
    FimTooLarge(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
