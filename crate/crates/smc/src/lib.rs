//! Experiment runner, file formats and command line for smoothed model
//! checking, built on `smc-core`.

pub mod compare;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod simulation;

pub use config::{ConfigFile, ExperimentConfig, InducingDesign, Mode};
pub use error::{Error, Result};
pub use experiment::{run, run_active, run_smoothed, run_sparse, RunReport, Surface, Timings};
pub use simulation::{naive_baseline, Baseline};
