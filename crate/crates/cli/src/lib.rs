//! Batch runner for the money flow model: named presets, TOML scenarios,
//! parameter sweeps and lattice checks, writing CSV, SVG and JSON.

pub mod config;
pub mod error;
pub mod lattice_cmd;
pub mod preset;
pub mod recompute;
pub mod scenario;
pub mod svg;
pub mod sweep;
pub mod table;

pub use config::ScenarioConfig;
pub use error::{CliError, Result};
pub use scenario::{run_scenario, simulate, Report, RunOutcome, Simulation};
