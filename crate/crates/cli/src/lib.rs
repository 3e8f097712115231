//! Experiment runner: named presets, a flat `key = value` config format,
//! seeded execution and CSV outputs.

pub mod config;
pub mod csv;
pub mod error;
pub mod manifest;
pub mod presets;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use manifest::RunManifest;
pub use presets::{run_preset, Check, Preset, PresetOutcome};
