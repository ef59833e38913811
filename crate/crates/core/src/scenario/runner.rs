//! Batch runs and log replay.

use crate::metrics::{to_jsonl, LogRecord, MetricsReport, TaskId};
use crate::shadow::RequestCounts;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::time::Instant;

use super::config::Scenario;
use super::sim::{InputFrame, Simulation, END_ABANDONED, END_TIMEOUT};
use super::ScenarioError;

/// Summary of one finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_hash: String,
    pub seed: u64,
    pub method: String,
    pub events: usize,
    pub log_hash: String,
    pub metrics: MetricsReport,
    pub task_outcomes: BTreeMap<TaskId, bool>,
    pub complete: bool,
    pub end_reason: String,
    pub logical_duration_ms: u64,
    pub wall_duration_ms: u64,
    pub shadow_requests: RequestCounts,
    /// Operator and robot utterances the assistant resolved to an intent.
    pub intents_handled: u64,
    /// Reported-state writes made by robots.
    pub shadow_updates: u64,
    pub messages_published: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub log: Vec<LogRecord>,
}

pub fn log_hash(log: &[LogRecord]) -> String {
    hex::encode(Sha256::digest(to_jsonl(log).as_bytes()))
}

/// Builds the report for a finished simulation.
pub fn finish_run(sim: Simulation, started: Instant) -> Result<RunOutput, ScenarioError> {
    let end = sim.end().cloned();
    let shadow_requests = sim.shadows().total_requests();
    let shadow_updates = sim.reported_updates();
    let messages_published = sim.published_count();
    let scenario_hash = sim.scenario().hash();
    let seed = sim.seed();
    let log = sim.into_log();
    let metrics = MetricsReport::from_log(&log).map_err(|e| ScenarioError::Log(e.to_string()))?;
    let intents_handled = log
        .iter()
        .filter(|r| matches!(r, LogRecord::Intent { intent: Some(_), error: None, .. }))
        .count() as u64;
    let report = RunReport {
        scenario_hash,
        seed,
        method: metrics.method.clone(),
        events: log.len(),
        log_hash: log_hash(&log),
        task_outcomes: metrics.task_outcomes.clone(),
        metrics,
        complete: end.as_ref().is_some_and(|e| e.complete),
        end_reason: end.as_ref().map(|e| e.reason.clone()).unwrap_or_default(),
        logical_duration_ms: end.as_ref().map_or(0, |e| e.sim_time),
        wall_duration_ms: started.elapsed().as_millis() as u64,
        shadow_requests,
        intents_handled,
        shadow_updates,
        messages_published,
    };
    let out = RunOutput { report, log };
    match out.report.end_reason.as_str() {
        END_TIMEOUT => Err(ScenarioError::Timeout(Box::new(out))),
        END_ABANDONED => Err(ScenarioError::SessionAbandoned(Box::new(out))),
        _ => Ok(out),
    }
}

/// Runs a scenario to completion as fast as possible.
pub fn run(scenario: &Scenario, seed: u64) -> Result<RunOutput, ScenarioError> {
    run_with_inputs(scenario, seed, &[])
}

/// Runs with external input frames applied at fixed logical times.
pub fn run_with_inputs(
    scenario: &Scenario,
    seed: u64,
    inputs: &[(u64, InputFrame)],
) -> Result<RunOutput, ScenarioError> {
    let started = Instant::now();
    let mut sim = Simulation::new(scenario, seed);
    for (at, frame) in inputs {
        sim.inject_at(*at, frame.clone());
    }
    sim.run_to_end();
    finish_run(sim, started)
}

/// Runs with logical time paced against the wall clock.
pub fn run_paced(scenario: &Scenario, seed: u64, time_scale: f64) -> Result<RunOutput, ScenarioError> {
    let started = Instant::now();
    let mut sim = Simulation::new(scenario, seed);
    while !sim.is_finished() {
        let target = (started.elapsed().as_secs_f64() * 1000.0 * time_scale) as u64;
        sim.run_until(target);
        std::thread::sleep(std::time::Duration::from_millis(10));
    }
    finish_run(sim, started)
}

/// Input frames recorded in a log, with their logical times.
pub fn recorded_inputs(log: &[LogRecord]) -> Result<Vec<(u64, InputFrame)>, ScenarioError> {
    log.iter()
        .filter_map(|r| match r {
            LogRecord::Input { frame, sim_time } => Some((*sim_time, frame)),
            _ => None,
        })
        .map(|(t, frame)| {
            serde_json::from_value(frame.clone())
                .map(|f| (t, f))
                .map_err(|e| ScenarioError::Log(format!("bad input frame at {t}ms: {e}")))
        })
        .collect()
}

/// Re-simulates a recorded run from its header seed and input frames.
pub fn replay_log(scenario: &Scenario, log: &[LogRecord]) -> Result<RunOutput, ScenarioError> {
    let header = log
        .iter()
        .find_map(|r| match r {
            LogRecord::RunStart(h) => Some(h),
            _ => None,
        })
        .ok_or_else(|| ScenarioError::Log("log has no run_start header".into()))?;
    if header.scenario_hash != scenario.hash() {
        return Err(ScenarioError::ReplayMismatch(format!(
            "log was recorded with scenario {} but {} was given",
            header.scenario_hash,
            scenario.hash()
        )));
    }
    run_with_inputs(scenario, header.seed, &recorded_inputs(log)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::OperatorMode;

    #[test]
    fn bundled_vahr_run_completes() {
        let out = run(&Scenario::bundled_full(), 1).unwrap();
        assert!(out.report.complete, "{}", out.report.end_reason);
        assert_eq!(out.report.task_outcomes.len(), 3);
        assert!(out.report.task_outcomes.values().all(|ok| *ok), "{:?}", out.report.task_outcomes);
    }

    #[test]
    fn bundled_keyboard_run_completes() {
        let scenario = Scenario::bundled_full().with_operator(OperatorMode::ScriptedKeyboard);
        let out = run(&scenario, 1).unwrap();
        assert!(out.report.complete, "{}", out.report.end_reason);
        assert!(out.report.task_outcomes.values().all(|ok| *ok), "{:?}", out.report.task_outcomes);
    }

    #[test]
    fn same_seed_same_log() {
        let s = Scenario::bundled_full();
        assert_eq!(run(&s, 9).unwrap().report.log_hash, run(&s, 9).unwrap().report.log_hash);
    }
}
