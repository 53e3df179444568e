//! Benchmark problems: configuration, drivers, collocation references and
//! output files.

pub mod config;
pub mod output;
pub mod run;
pub mod setup;

pub use config::{build_test, resolve, ControlVariate, ExperimentConfig, FullModel, ResolvedConfig, Scale};
pub use run::{collocation_reference, run_experiment, ErrorCurve, EstimatorSeries, ExperimentResult, Reference};
