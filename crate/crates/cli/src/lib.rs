//! Experiment configuration, orchestration over dimensions, methods and
//! trials, and CSV/JSON persistence of the per-level metrics.

pub mod config;
pub mod experiment;
pub mod export;

pub use config::{ExperimentConfig, Profile};
pub use experiment::{run_experiment, ExperimentOutput};
pub use export::{export_plotdata, ExportError};
