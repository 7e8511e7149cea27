//! Seeded loss-comparison experiments on top of `scope-lab-core`: config
//! parsing, trial orchestration, precision reports and SVG curves.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod precision;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use experiment::{run_experiment, ExperimentError, RunReport};
pub use plot::emit_plot;
pub use precision::{precision_report, PrecisionReport};
