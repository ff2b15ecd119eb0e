//! Benchmark harness for the `rbgm` library.
//!
//! Runs configured experiments (`run <config>`) or reproduces the
//! published experiment grids (`reproduce table1|table2|fig-sensing`) for
//! the nonlinear eigenvalue problem and low-rank quadratic sensing,
//! emitting per-iteration CSV logs, a machine-readable JSON comparison
//! report, and a human-readable summary table.

pub mod cli;
pub mod config;
pub mod defaults;
pub mod output;
pub mod reference;
pub mod runner;

pub use cli::{main_with_args, EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RUN_FAILURE};
pub use config::{ExperimentConfig, ProblemSpec, SensingManifold};
pub use output::{write_outputs, ComparisonReport};
pub use runner::{run_cell, run_experiment, CellResult, CellSummary, RunOptions};
