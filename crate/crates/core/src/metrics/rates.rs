//! Command, task and communication success rates.

use crate::assistant::Weather;
use crate::robots::ZoneName;
use crate::voice_link::RobotIntentName;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::log::{LogRecord, TaskExpectation, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub attempted: u64,
    pub succeeded: u64,
}

impl Rate {
    /// `None` when nothing was attempted.
    pub fn success(&self) -> Option<f64> {
        (self.attempted > 0).then(|| self.succeeded as f64 / self.attempted as f64)
    }

    pub fn failure(&self) -> Option<f64> {
        self.success().map(|s| 1.0 - s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRates {
    pub command: Rate,
    pub task: Rate,
    pub communication: Rate,
    pub task_outcomes: BTreeMap<TaskId, bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct DeliveryFact {
    robot: u32,
    zone: ZoneName,
    at: u64,
}

/// Zone a weather value sends packages to.
pub fn weather_zone(weather: Weather) -> ZoneName {
    match weather {
        Weather::Sunny => ZoneName::A,
        Weather::Rainy => ZoneName::C,
    }
}

fn deliveries_for(log: &[LogRecord], task: TaskId) -> Vec<DeliveryFact> {
    log.iter()
        .filter_map(|r| match r {
            LogRecord::Delivery {
                robot_id,
                zone,
                task: Some(t),
                sim_time,
                ..
            } if *t == task => Some(DeliveryFact {
                robot: *robot_id,
                zone: *zone,
                at: *sim_time,
            }),
            _ => None,
        })
        .collect()
}

fn all_to(deliveries: &[DeliveryFact], robot: u32, zone: ZoneName) -> bool {
    let mine: Vec<_> = deliveries.iter().filter(|d| d.robot == robot).collect();
    !mine.is_empty() && mine.iter().all(|d| d.zone == zone)
}

/// Ordering check for sequential delivery: both robots delivered only to
/// `zone`, and the initiator's first unload finished strictly before the
/// peer started loading.
pub fn sequential_led(log: &[LogRecord], task: TaskId, initiator: u32, peer: u32, zone: ZoneName) -> bool {
    let deliveries = deliveries_for(log, task);
    if !all_to(&deliveries, initiator, zone) || !all_to(&deliveries, peer, zone) {
        return false;
    }
    let initiator_unload = deliveries
        .iter()
        .filter(|d| d.robot == initiator)
        .map(|d| d.at)
        .min();
    let peer_load = log
        .iter()
        .filter_map(|r| match r {
            LogRecord::LoadStart {
                robot_id,
                task: Some(t),
                sim_time,
            } if *robot_id == peer && *t == task => Some(*sim_time),
            _ => None,
        })
        .min();
    matches!((initiator_unload, peer_load), (Some(u), Some(l)) if u < l)
}

pub fn task_succeeded(log: &[LogRecord], expectation: &TaskExpectation) -> bool {
    match expectation {
        TaskExpectation::Zones { task, zones } => {
            let deliveries = deliveries_for(log, *task);
            zones.iter().all(|(robot, zone)| all_to(&deliveries, *robot, *zone))
        }
        TaskExpectation::Weather { task, robots } => {
            let weather = log.iter().find_map(|r| match r {
                LogRecord::Weather { phase, value, .. } if phase == task.as_str() => Some(*value),
                _ => None,
            });
            let Some(weather) = weather else {
                return false;
            };
            let zone = weather_zone(weather);
            let deliveries = deliveries_for(log, *task);
            robots.iter().all(|robot| all_to(&deliveries, *robot, zone))
        }
        TaskExpectation::Sequential {
            task,
            initiator,
            peer,
            zone,
        } => sequential_led(log, *task, *initiator, *peer, *zone),
    }
}

pub fn success_rates(log: &[LogRecord], tasks: &[TaskExpectation]) -> SuccessRates {
    let issued = log
        .iter()
        .filter(|r| matches!(r, LogRecord::CommandStart(_)))
        .count() as u64;
    let acked = log
        .iter()
        .filter(|r| matches!(r, LogRecord::CommandAck(_)))
        .count() as u64;

    let mut exchanges = Rate {
        attempted: 0,
        succeeded: 0,
    };
    for record in log {
        match record {
            LogRecord::Intent { intent, .. } => {
                exchanges.attempted += 1;
                exchanges.succeeded += u64::from(intent.is_some());
            }
            LogRecord::Exchange { recognized, .. } => {
                exchanges.attempted += 1;
                exchanges.succeeded += u64::from(*recognized != RobotIntentName::Unrecognized);
            }
            _ => {}
        }
    }

    let task_outcomes: BTreeMap<TaskId, bool> = tasks
        .iter()
        .map(|t| (t.task(), task_succeeded(log, t)))
        .collect();
    let task = Rate {
        attempted: tasks.len() as u64,
        succeeded: task_outcomes.values().filter(|ok| **ok).count() as u64,
    };

    SuccessRates {
        command: Rate {
            attempted: issued,
            succeeded: acked.min(issued),
        },
        task,
        communication: exchanges,
        task_outcomes,
    }
}
