//! Experiment harness and file formats around [`edmc_core`]: TOML
//! configuration, scenario generation, seeded Monte Carlo sweeps and CSV
//! output. The `edmc` binary exposes these as subcommands.

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod layouts;
pub mod scenario;

pub use config::{ExperimentConfig, ScenarioKind, SolverId};
pub use error::{AppError, AppResult};
pub use harness::{aggregate, emit_results, run_real_layout, run_sweep, Axis, TrialRecord};
