//! Configuration, run orchestration, parameter sweeps, persistence, plots and reference checks
//! for the chemotaxis-consumption solver in `chemotaxis-core`.
//!
//! The `chemotaxis` binary exposes these as subcommands; everything it does is also reachable
//! from this library.

pub mod checks;
pub mod config;
pub mod error;
pub mod experiment;
pub mod initial;
pub mod output;
pub mod plot;
pub mod sweep;

pub use config::{load_config, parse_config, GridConfig, InitialCondition, RunConfig};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, simulate, ExperimentReport, Manifest, Simulation};
pub use sweep::{load_sweep, parse_sweep, run_sweep, SweepResult, SweepRow, SweepSpec};
