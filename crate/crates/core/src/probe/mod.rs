//! Measurements: landscape reports, noise and sharpness statistics, fits and
//! the SGD / reference / predicted coupling run.

mod coupling;
mod report;
mod stats;

pub use coupling::{coupling_run, CouplingOptions, CouplingRecord, CouplingRun};
pub use report::{
    delta_epsilon, lanczos_options_for, probe_point, FD_LANCZOS_TOL, LandscapeReport, ProbeOptions, ProbedFrame};
pub use stats::{
    batch_sharpness, decorrelation_residual, equilibrium_sharpness, power_law_fit,
    projected_noise_variance, BatchSharpness, Decorrelation, NoiseVariance, PowerLawFit,
    BATCH_SHARPNESS_BATCHES, DECORRELATION_MIN_ENSEMBLE, EQUILIBRIUM_WINDOW,
    NOISE_VARIANCE_BATCHES,
};
