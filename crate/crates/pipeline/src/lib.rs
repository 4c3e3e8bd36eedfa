//! End-to-end rooftop solar assessment: off-nadir inputs to nadir surface
//! model, roof segments, flux, panel layouts and evaluation.

pub mod config;
pub mod evaluate;
pub mod paths;
pub mod run;
pub mod scene;

pub use config::{validate_config, ConfigErrors, PipelineConfig};
pub use evaluate::{evaluate, load_prefix, EnergyFile, PrefixData};
pub use run::{run_pipeline, run_pipeline_with_workers, PipelineError, RunManifest, StageRecord};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SATSOLAR_WORKERS";
