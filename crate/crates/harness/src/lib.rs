//! Scenario harness: configuration, closed-loop execution of both
//! controllers on identical reference realizations, trace/report/plot
//! emission, and the pieces the `nnctl` command line is built from.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;
pub mod trace_io;

pub use config::{builtin_scenario, builtin_scenarios, ConfigError, ScenarioConfig};
pub use run::{run_scenario, simulate, RunArtifacts, RunError, AMPC_ID, HDLNNC_ID};
