//! Batch front end for actuopt: TOML experiment configs, the simulate,
//! optimize, worst-ic, riccati-validate and gradcheck pipelines, parameter
//! sweeps and reproducibility manifests.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod sweep;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, Result};
pub use pipeline::{run, Pipeline, RunOutcome};
pub use sweep::{parse_values, sweep, SweepOutcome, SweepRow};
