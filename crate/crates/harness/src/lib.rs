//! Experiment configuration, LLN and CLT studies, plots and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod plot;
pub mod study;

pub use config::{load_config, parse_config, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use study::{run_clt_study, run_lln_study, Check, StudyResult};
