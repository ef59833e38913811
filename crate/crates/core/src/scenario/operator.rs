//! Scripted operators: a reactive job list per robot for the current task.
//!
//! The voice operator speaks one high-level intent per robot and step, then
//! turns to the puzzle. The keyboard operator teleoperates every leg itself
//! and must ask the assistant about the weather once per robot in Task II.

use crate::assistant::Weather;
use crate::metrics::rates::weather_zone;
use crate::metrics::TaskId;
use crate::robots::ZoneName;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::config::{Faults, OperatorMode};

/// Question the keyboard operator asks on each robot's behalf.
pub const OPERATOR_WEATHER_QUESTION: &str = "Alexa, what is the weather today?";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OperatorAction {
    /// Speak an intent to the assistant. `robot` attributes the interaction.
    Speak { text: String, robot: Option<u32> },
    /// Ask the assistant for the weather before driving `robot`.
    AskWeather { robot: u32 },
    /// Teleoperate `robot` to `zone`.
    Drive { robot: u32, zone: ZoneName },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Zone(ZoneName),
    Weather,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Job {
    /// Speak once every robot in `needs` is quiescent.
    Speak {
        text: String,
        robot: Option<u32>,
        needs: Vec<u32>,
    },
    AskWeather {
        robot: u32,
    },
    Drive {
        robot: u32,
        target: Target,
    },
    /// Block the lane until `robot` has delivered in this task.
    AwaitDelivery {
        robot: u32,
    },
}

/// What the operator can see when deciding.
#[derive(Debug, Clone, Default)]
pub struct OperatorView {
    pub quiescent: BTreeSet<u32>,
    pub delivered: BTreeSet<u32>,
    pub known_weather: Option<Weather>,
}

/// Spoken name of a robot id as the skill model expects it.
pub fn robot_phrase(robot: u32) -> String {
    match robot {
        1 => "placebot one".into(),
        2 => "placebot two".into(),
        n => format!("placebot {n}"),
    }
}

fn zone_phrase(zone: ZoneName) -> String {
    match zone {
        ZoneName::Loading => "the loading zone".into(),
        z => format!("zone {}", z.as_str().to_lowercase()),
    }
}

pub fn navigate_utterance(robot: u32, zone: ZoneName) -> String {
    format!("send {} to {}", robot_phrase(robot), zone_phrase(zone))
}

pub fn weather_utterance(robot: u32) -> String {
    format!("{} deliver the package based on the weather", robot_phrase(robot))
}

pub const SEQUENTIAL_UTTERANCE: &str = "start sequential delivery";

/// Zone the Task I fault sends a robot to: the first zone nobody is assigned.
pub fn wrong_zone(assignments: &BTreeMap<u32, ZoneName>) -> ZoneName {
    ZoneName::DELIVERY
        .into_iter()
        .find(|z| !assignments.values().any(|a| a == z))
        .unwrap_or(ZoneName::A)
}

#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    mode: OperatorMode,
    robots: Vec<u32>,
    assignments: BTreeMap<u32, ZoneName>,
    faults: Faults,
    /// Lane 0 holds fleet-wide jobs; lane `r` holds robot `r`'s jobs.
    lanes: BTreeMap<u32, VecDeque<Job>>,
}

impl ScriptedOperator {
    pub fn new(
        mode: OperatorMode,
        robots: Vec<u32>,
        assignments: BTreeMap<u32, ZoneName>,
        faults: Faults,
    ) -> Self {
        ScriptedOperator {
            mode,
            robots,
            assignments,
            faults,
            lanes: BTreeMap::new(),
        }
    }

    fn task1_zone(&self, robot: u32) -> ZoneName {
        if self.faults.task1_wrong_zone_robot == Some(robot) {
            wrong_zone(&self.assignments)
        } else {
            self.assignments.get(&robot).copied().unwrap_or(ZoneName::A)
        }
    }

    /// Replaces the job lists with the plan for `task`.
    pub fn plan(&mut self, task: TaskId) {
        self.lanes.clear();
        let keyboard = self.mode == OperatorMode::ScriptedKeyboard;
        match task {
            TaskId::I => {
                for &r in &self.robots {
                    let zone = self.task1_zone(r);
                    let jobs = if keyboard {
                        vec![
                            Job::Drive {
                                robot: r,
                                target: Target::Zone(ZoneName::Loading),
                            },
                            Job::Drive {
                                robot: r,
                                target: Target::Zone(zone),
                            },
                        ]
                    } else {
                        vec![
                            speak(navigate_utterance(r, ZoneName::Loading), r),
                            speak(navigate_utterance(r, zone), r),
                        ]
                    };
                    self.lanes.insert(r, jobs.into());
                }
            }
            TaskId::II => {
                for &r in &self.robots {
                    let jobs = if keyboard {
                        vec![
                            Job::AskWeather { robot: r },
                            Job::Drive {
                                robot: r,
                                target: Target::Zone(ZoneName::Loading),
                            },
                            Job::Drive {
                                robot: r,
                                target: Target::Weather,
                            },
                        ]
                    } else {
                        vec![speak(weather_utterance(r), r)]
                    };
                    self.lanes.insert(r, jobs.into());
                }
            }
            TaskId::III => {
                if keyboard {
                    let (first, second) = (1, 2);
                    let leg = |r: u32| {
                        [
                            Job::Drive {
                                robot: r,
                                target: Target::Zone(ZoneName::Loading),
                            },
                            Job::Drive {
                                robot: r,
                                target: Target::Zone(ZoneName::D),
                            },
                        ]
                    };
                    self.lanes.insert(first, leg(first).into());
                    let mut lane = VecDeque::from([Job::AwaitDelivery { robot: first }]);
                    lane.extend(leg(second));
                    self.lanes.insert(second, lane);
                } else {
                    self.lanes.insert(
                        0,
                        VecDeque::from([Job::Speak {
                            text: SEQUENTIAL_UTTERANCE.into(),
                            robot: None,
                            needs: self.robots.clone(),
                        }]),
                    );
                }
            }
        }
    }

    pub fn is_done(&self) -> bool {
        self.lanes.values().all(VecDeque::is_empty)
    }

    /// Next action, if any job is ready; the job is consumed.
    pub fn next_action(&mut self, view: &OperatorView) -> Option<OperatorAction> {
        for lane in self.lanes.values_mut() {
            while let Some(Job::AwaitDelivery { robot }) = lane.front() {
                if view.delivered.contains(robot) {
                    lane.pop_front();
                } else {
                    break;
                }
            }
            let Some(front) = lane.front() else {
                continue;
            };
            let action = match front {
                Job::Speak { text, robot, needs } => needs
                    .iter()
                    .all(|r| view.quiescent.contains(r))
                    .then(|| OperatorAction::Speak {
                        text: text.clone(),
                        robot: *robot,
                    }),
                Job::AskWeather { robot } => Some(OperatorAction::AskWeather { robot: *robot }),
                Job::Drive { robot, target } => {
                    let zone = match target {
                        Target::Zone(z) => Some(*z),
                        Target::Weather => view.known_weather.map(weather_zone),
                    };
                    zone.filter(|_| view.quiescent.contains(robot))
                        .map(|zone| OperatorAction::Drive {
                            robot: *robot,
                            zone,
                        })
                }
                Job::AwaitDelivery { .. } => None,
            };
            if action.is_some() {
                lane.pop_front();
                return action;
            }
        }
        None
    }
}

fn speak(text: String, robot: u32) -> Job {
    Job::Speak {
        text,
        robot: Some(robot),
        needs: vec![robot],
    }
}
