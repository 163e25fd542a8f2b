//! CLI-facing layer: configuration, scenario registry, persistence, sweeps,
//! and plotting.

pub mod barrier;
pub mod config;
pub mod exec;
pub mod io;
pub mod plot;
pub mod scenario;
pub mod sweep;

pub use config::RunConfig;
pub use exec::{execute, ExecExtras, ExecReport};
pub use scenario::{run_scenario, scenario_config, ScenarioReport, SCENARIOS};
