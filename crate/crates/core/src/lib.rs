//! Key-rate simulation and optimization for fully passive
//! reference-frame-independent QKD.
//!
//! The pipeline goes from the passive source's emission density over
//! intensity and polarization, through post-selection interval moments and
//! detection statistics, three-intensity decoy-state linear programs, and
//! Kato finite-key concentration bounds, to the RFI secure key rate — plus a
//! distance-sweep optimizer over the post-selection interval widths and the
//! source intensity scale.
//!
//! Modules follow that flow:
//!
//! - [`source`]: emission density, Monte Carlo sampler, interval geometry,
//!   Poisson moments, Fock-subspace density matrices;
//! - [`detection`]: branching into Bob's rotated bases, yields, gains and
//!   error rates, interval averages;
//! - [`decoy`]: trace distances and the yield / error-yield LPs;
//! - [`kato`]: concentration bounds in all four directions;
//! - [`keyrate`]: C statistic, IE₁, finite key length, asymptotic rate, and
//!   the actively modulated baseline;
//! - [`pipeline`]: one-candidate-one-distance evaluation;
//! - [`optimize`]: seeded Nelder–Mead search with warm starts.

pub mod decoy;
pub mod detection;
pub mod hermitian;
pub mod kato;
pub mod keyrate;
pub mod optimize;
pub mod pipeline;
pub mod quad;
pub mod simplex;
pub mod source;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("region has zero measure")]
    EmptyRegion,
    #[error("matrix dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("Kato count transform is degenerate (N too small for the requested epsilon)")]
    DegenerateRegime,
    #[error("linear program infeasible")]
    Infeasible,
}

pub type Result<T> = std::result::Result<T, Error>;

pub use decoy::{
    error_yield_lp, trace_distance, yield_lp, DecoyScenario, LpBounds, LpStatus,
    TraceDistanceConvention,
};
pub use detection::{
    branching, gain_and_error, interval_moments, n_photon_yields, BasisAmplitudes, ChannelParams,
    DetectorParams,
};
pub use kato::{kato_count_bounds, kato_expectation_bounds, ConfidenceBound};
pub use keyrate::{
    active_baseline_best, active_baseline_rate, asymptotic_rate, binary_entropy, finite_key_length,
    ie1, rfi_c_lower, single_photon_error_bounds, CLowerRule, CountEstimates, KeyRateResult,
    ProtocolParams, SecurityParams,
};
pub use optimize::{
    optimize_distance, Checkpoint, CheckpointEntry, GeometryCache, OptimizationProblem,
};
pub use pipeline::{
    evaluate_candidate, evaluate_with_geometry, source_geometry, Candidate, Conventions,
    DensityConvention, ErrorAverage, EvaluationDetails, Experiment, Mode, PairingEstimates,
    SourceGeometry, PAIRINGS,
};
pub use source::{
    density, fock_density, interval_probability, photon_number_moment, sample_source, Basis,
    BlochIntensityPoint, FockDensityMatrix, IntensityClass, IntervalFamily, Region, SigmaWeighting,
    SourceParams, StateLabel,
};
