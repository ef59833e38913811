//! Scenarios: configuration, the discrete-event simulation, batch runs,
//! replay, exports and the live gateway.

pub mod config;
pub mod export;
pub mod gateway;
pub mod operator;
pub mod rng;
pub mod runner;
pub mod sim;

pub use config::{
    load_scenario, CommandTransport, Faults, Latencies, OperatorMode, OperatorModel, RobotSpec, Scenario,
    ScenarioFile, TransportMode, BUNDLED_TASKS_FULL,
};
pub use export::{compare, read_csv, write_csv, write_json, Comparison, CsvRow, GroupStats};
pub use gateway::{serve, serve_listener, GatewayConfig};
pub use operator::{OperatorAction, ScriptedOperator};
pub use rng::derive_stream;
pub use runner::{log_hash, recorded_inputs, replay_log, run, run_paced, run_with_inputs, RunOutput, RunReport};
pub use sim::{InputFrame, OutputFrame, RobotView, Simulation};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("parse error at `{field}`: {msg}")]
    Parse { field: String, msg: String },
    #[error("invalid scenario field `{field}`: {msg}")]
    Validation { field: String, msg: String },
    #[error("run timed out at {}ms", .0.report.logical_duration_ms)]
    Timeout(Box<RunOutput>),
    #[error("session abandoned by the client")]
    SessionAbandoned(Box<RunOutput>),
    #[error("cannot bind gateway: {0}")]
    Bind(String),
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
    #[error("log error: {0}")]
    Log(String),
}

impl ScenarioError {
    /// The partial run carried by a timeout or abandoned session.
    pub fn partial_run(&self) -> Option<&RunOutput> {
        match self {
            ScenarioError::Timeout(out) | ScenarioError::SessionAbandoned(out) => Some(out),
            _ => None,
        }
    }
}
