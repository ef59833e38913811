//! Per-run metrics summary computed from an event log.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::hri::{compute_fo, compute_rad, indirect_interaction};
use super::log::{LogRecord, RunHeader, TaskId};
use super::rates::success_rates;
use super::segment::{segment, UnpairedEvent};
use super::tlx::tlx_score;
use super::{InteractionEvent, InteractionKind, MetricsError, TrustLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotMetrics {
    pub ie_s: f64,
    pub nt_s: f64,
    pub rad: Option<f64>,
    pub fo_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub seed: u64,
    pub ie_s: f64,
    pub nt_s: f64,
    /// Direct interaction time fraction (equal to RAD).
    pub dit: Option<f64>,
    /// Indirect interaction time fraction implied by trust.
    pub iit: Option<f64>,
    pub rad: Option<f64>,
    pub trust_adjusted_rad: Option<f64>,
    pub fo_s: Option<f64>,
    pub total_task_time_s: f64,
    pub command_success_rate: Option<f64>,
    pub command_failure_rate: Option<f64>,
    pub task_success_rate: Option<f64>,
    pub task_failure_rate: Option<f64>,
    pub communication_success_rate: Option<f64>,
    pub communication_failure_rate: Option<f64>,
    pub commands_issued: u64,
    pub tasks_expected: u64,
    pub exchanges_attempted: u64,
    pub task_outcomes: BTreeMap<TaskId, bool>,
    pub solved_puzzle_parts: u64,
    pub trust: TrustLevel,
    #[serde(with = "crate::value::robot_keys")]
    pub per_robot: BTreeMap<u32, RobotMetrics>,
    pub unpaired_events: Vec<UnpairedEvent>,
    /// Conditions that left a metric undefined, such as `DegenerateRun`.
    pub markers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tlx: Option<BTreeMap<String, f64>>,
}

/// Span from the first task start to the last task end, falling back to the
/// run end when no task bracketing exists.
fn total_task_time_ms(log: &[LogRecord]) -> u64 {
    let first_start = log.iter().find_map(|r| match r {
        LogRecord::TaskStart { sim_time, .. } => Some(*sim_time),
        _ => None,
    });
    let last_end = log.iter().rev().find_map(|r| match r {
        LogRecord::TaskEnd { sim_time, .. } => Some(*sim_time),
        _ => None,
    });
    match (first_start, last_end) {
        (Some(s), Some(e)) if e >= s => e - s,
        _ => log
            .iter()
            .rev()
            .find_map(|r| match r {
                LogRecord::RunEnd { sim_time, .. } => Some(*sim_time),
                _ => None,
            })
            .unwrap_or(0),
    }
}

fn marker(err: &MetricsError) -> String {
    match err {
        MetricsError::DegenerateRun => "DegenerateRun".into(),
        MetricsError::ZeroRad => "ZeroRad".into(),
        other => other.to_string(),
    }
}

impl MetricsReport {
    pub fn from_log(log: &[LogRecord]) -> Result<MetricsReport, MetricsError> {
        let header: &RunHeader = log
            .iter()
            .find_map(|r| match r {
                LogRecord::RunStart(h) => Some(h),
                _ => None,
            })
            .ok_or(MetricsError::MissingHeader)?;

        let events: Vec<InteractionEvent> = log.iter().filter_map(LogRecord::as_interaction).collect();
        let seg = segment(&events);
        let ie_s = seg.aggregate.ie_s();
        let nt_s = seg.aggregate.nt_s();
        let total_s = total_task_time_ms(log) as f64 / 1000.0;

        let mut markers = Vec::new();
        let rad = match compute_rad(ie_s, nt_s) {
            Ok(r) => Some(r),
            Err(e) => {
                markers.push(marker(&e));
                None
            }
        };
        let fo_s = rad.and_then(|r| match compute_fo(total_s, r) {
            Ok(fo) => Some(fo),
            Err(e) => {
                markers.push(marker(&e));
                None
            }
        });
        let iit = rad.and_then(|_| indirect_interaction(nt_s, ie_s, header.trust.value()).ok());
        let trust_adjusted_rad = rad.zip(iit).map(|(d, i)| d + i);

        let per_robot = seg
            .per_robot
            .iter()
            .map(|(id, totals)| {
                let rad = compute_rad(totals.ie_s(), totals.nt_s()).ok();
                let fo_s = rad.and_then(|r| compute_fo(total_s, r).ok());
                (
                    *id,
                    RobotMetrics {
                        ie_s: totals.ie_s(),
                        nt_s: totals.nt_s(),
                        rad,
                        fo_s,
                    },
                )
            })
            .collect();

        let rates = success_rates(log, &header.tasks);
        let tlx = header.tlx.as_ref().map(tlx_score).transpose()?;

        Ok(MetricsReport {
            method: header.method.clone(),
            seed: header.seed,
            ie_s,
            nt_s,
            dit: rad,
            iit,
            rad,
            trust_adjusted_rad,
            fo_s,
            total_task_time_s: total_s,
            command_success_rate: rates.command.success(),
            command_failure_rate: rates.command.failure(),
            task_success_rate: rates.task.success(),
            task_failure_rate: rates.task.failure(),
            communication_success_rate: rates.communication.success(),
            communication_failure_rate: rates.communication.failure(),
            commands_issued: rates.command.attempted,
            tasks_expected: rates.task.attempted,
            exchanges_attempted: rates.communication.attempted,
            task_outcomes: rates.task_outcomes,
            solved_puzzle_parts: events
                .iter()
                .filter(|e| e.kind == InteractionKind::PuzzlePiecePlaced)
                .count() as u64,
            trust: header.trust,
            per_robot,
            unpaired_events: seg.unpaired,
            markers,
            tlx,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::log::At;

    fn header() -> LogRecord {
        LogRecord::RunStart(RunHeader {
            scenario_hash: "x".into(),
            seed: 7,
            method: "vahr".into(),
            robots: vec![1],
            tasks: vec![],
            trust: TrustLevel::VeryHigh,
            tlx: None,
        })
    }

    fn at(robot: u32, t: u64) -> At {
        At {
            robot_id: Some(robot),
            sim_time: t,
        }
    }

    #[test]
    fn single_robot_run() {
        let log = vec![
            header(),
            LogRecord::TaskStart {
                task: TaskId::I,
                sim_time: 0,
            },
            LogRecord::CommandStart(at(1, 0)),
            LogRecord::CommandAck(at(1, 4_000)),
            LogRecord::RobotAutonomousStart(at(1, 4_000)),
            LogRecord::RobotIdle(at(1, 14_000)),
            LogRecord::PuzzlePiecePlaced(at(1, 9_000)),
            LogRecord::TaskEnd {
                task: TaskId::I,
                success: true,
                led: None,
                reason: "delivered".into(),
                sim_time: 14_000,
            },
        ];
        let r = MetricsReport::from_log(&log).unwrap();
        assert_eq!(r.ie_s, 4.0);
        assert_eq!(r.nt_s, 10.0);
        let rad = 4.0 / 14.0;
        assert!((r.rad.unwrap() - rad).abs() < 1e-15);
        assert!((r.fo_s.unwrap() - 14.0 / rad).abs() < 1e-9);
        assert!((r.trust_adjusted_rad.unwrap() - (rad + 10.0 * 0.1 / 14.0)).abs() < 1e-12);
        assert_eq!(r.solved_puzzle_parts, 1);
        assert_eq!(r.per_robot[&1].ie_s, 4.0);
        assert!(r.markers.is_empty());
    }

    #[test]
    fn degenerate_run_is_marked() {
        let r = MetricsReport::from_log(&[header()]).unwrap();
        assert_eq!(r.rad, None);
        assert_eq!(r.fo_s, None);
        assert_eq!(r.markers, vec!["DegenerateRun".to_string()]);
    }

    #[test]
    fn zero_rad_is_marked() {
        let log = vec![
            header(),
            LogRecord::RobotAutonomousStart(at(1, 0)),
            LogRecord::RobotIdle(at(1, 5_000)),
        ];
        let r = MetricsReport::from_log(&log).unwrap();
        assert_eq!(r.rad, Some(0.0));
        assert_eq!(r.fo_s, None);
        assert_eq!(r.markers, vec!["ZeroRad".to_string()]);
    }

    #[test]
    fn missing_header() {
        assert_eq!(MetricsReport::from_log(&[]), Err(MetricsError::MissingHeader));
    }
}
