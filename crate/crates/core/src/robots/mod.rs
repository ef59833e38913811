//! Simulated placebots on a grid world.
//!
//! A robot runs a small mission queue. Manual navigation, the weather-driven
//! delivery and both roles of the sequential delivery are all expressed as
//! missions; arms at the loading zone and at delivery zones are modelled as
//! fixed load/unload durations.

mod world;

pub use world::{Cell, WorldConfig, ZoneName};

use crate::value::{Scalar, StateMap};
use crate::voice_link::{lex_interpret, RobotIntent, RobotIntentName};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use thiserror::Error;

pub const WEATHER_QUESTION: &str = "Alexa, what is the weather today?";
pub const SEQUENTIAL_DONE_TOPIC: &str = "vahr/coord/sequential-done";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RobotError {
    #[error("malformed command: {0}")]
    MalformedCommand(String),
    #[error("unknown zone `{0}`")]
    UnknownZone(String),
    #[error("robot {0} has no voice channel")]
    VoiceChannelUnavailable(u32),
    #[error("robot {0} never received the coordination signal")]
    CoordinationTimeout(u32),
}

/// Shadow thing name for a robot id.
pub fn thing_id(robot: u32) -> String {
    format!("placebot{robot}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Navigating(ZoneName),
    Loading,
    Unloading,
    AskingWeather,
    Stuck,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Idle => "Idle",
            Phase::Navigating(_) => "Navigating",
            Phase::Loading => "Loading",
            Phase::Unloading => "Unloading",
            Phase::AskingWeather => "AskingWeather",
            Phase::Stuck => "Stuck",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Navigating(z) => write!(f, "Navigating({z})"),
            other => f.write_str(other.label()),
        }
    }
}

pub const STATUS_TASK_COMPLETED: &str = "Task Completed";
pub const STATUS_WAITING: &str = "Waiting";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Package {
    pub id: u32,
    pub zone_tag: Option<ZoneName>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Command {
    Navigate(ZoneName),
    WeatherNavigate,
    SequentialDelivery {
        initiator: u32,
        peer: u32,
        zone: ZoneName,
    },
    Stop,
}

impl Command {
    /// Parses a command payload. `robot`, when present, names the addressee.
    pub fn from_payload(payload: &StateMap) -> Result<Command, RobotError> {
        let kind = payload
            .get("kind")
            .and_then(Scalar::as_str)
            .ok_or_else(|| RobotError::MalformedCommand("missing kind".into()))?;
        let zone = |key: &str| -> Result<Option<ZoneName>, RobotError> {
            payload
                .get(key)
                .map(|v| {
                    v.as_str()
                        .ok_or_else(|| RobotError::MalformedCommand(format!("{key} must be a string")))
                        .and_then(str::parse)
                })
                .transpose()
        };
        let id = |key: &str, default: u32| -> u32 {
            payload
                .get(key)
                .and_then(Scalar::as_int)
                .and_then(|v| u32::try_from(v).ok())
                .unwrap_or(default)
        };
        match kind {
            "navigate" => zone("zone")?
                .map(Command::Navigate)
                .ok_or_else(|| RobotError::MalformedCommand("navigate without zone".into())),
            "weather_navigate" => Ok(Command::WeatherNavigate),
            "sequential_delivery" => Ok(Command::SequentialDelivery {
                initiator: id("initiator", 1),
                peer: id("peer", 2),
                zone: zone("zone")?.unwrap_or(ZoneName::D),
            }),
            "stop" => Ok(Command::Stop),
            other => Err(RobotError::MalformedCommand(format!("unknown kind `{other}`"))),
        }
    }

    pub fn to_payload(&self) -> StateMap {
        let mut m = StateMap::new();
        match self {
            Command::Navigate(z) => {
                m.insert("kind".into(), "navigate".into());
                m.insert("zone".into(), z.as_str().into());
            }
            Command::WeatherNavigate => {
                m.insert("kind".into(), "weather_navigate".into());
            }
            Command::SequentialDelivery {
                initiator,
                peer,
                zone,
            } => {
                m.insert("kind".into(), "sequential_delivery".into());
                m.insert("initiator".into(), (*initiator).into());
                m.insert("peer".into(), (*peer).into());
                m.insert("zone".into(), zone.as_str().into());
            }
            Command::Stop => {
                m.insert("kind".into(), "stop".into());
            }
        }
        m
    }
}

/// One step of a robot mission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    GoTo(ZoneName),
    /// Load at the loading zone if empty, unload elsewhere if carrying.
    Auto,
    Load,
    Unload,
    AskWeather,
    WaitSignal,
    Signal,
}

/// Injected misbehaviour for failure-path testing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotFaults {
    /// Peer acts as initiator and vice versa in sequential delivery.
    pub swap_sequential_roles: bool,
    /// Initiator delivers to this zone instead of the commanded one.
    pub initiator_zone: Option<ZoneName>,
    /// Initiator never publishes the go-signal.
    pub suppress_done_signal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotParams {
    pub coordination_timeout_ms: u64,
    pub max_weather_retries: u32,
    /// Sequential peer drives to the loading zone before the go-signal.
    pub peer_preposition: bool,
    pub faults: RobotFaults,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            coordination_timeout_ms: 120_000,
            max_weather_retries: 2,
            peer_preposition: false,
            faults: RobotFaults::default(),
        }
    }
}

/// Observable effects of advancing or commanding a robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RobotOutput {
    PhaseChanged {
        from: Phase,
        to: Phase,
        status: String,
    },
    LoadStarted,
    Loaded(Package),
    Delivered {
        zone: ZoneName,
        package: Package,
    },
    Say(String),
    Heard(RobotIntent),
    Publish {
        topic: String,
        payload: StateMap,
    },
    CoordinationTimeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Robot {
    pub id: u32,
    /// Position in millicells.
    pos: (i64, i64),
    pub phase: Phase,
    pub status: String,
    pub cargo: Option<Package>,
    mission: VecDeque<Step>,
    queued: Option<Command>,
    timer_ms: u64,
    move_carry: u64,
    weather_attempts: u32,
    wait_deadline: Option<u64>,
    packages_loaded: u32,
    last_cmd_id: i64,
    params: RobotParams,
}

impl Robot {
    pub fn new(id: u32, start: Cell, params: RobotParams) -> Self {
        Robot {
            id,
            pos: (i64::from(start.0) * 1000, i64::from(start.1) * 1000),
            phase: Phase::Idle,
            status: Phase::Idle.label().to_string(),
            cargo: None,
            mission: VecDeque::new(),
            queued: None,
            timer_ms: 0,
            move_carry: 0,
            weather_attempts: 0,
            wait_deadline: None,
            packages_loaded: 0,
            last_cmd_id: 0,
            params,
        }
    }

    pub fn thing_id(&self) -> String {
        thing_id(self.id)
    }

    /// Cell the robot is on, if exactly on a cell center.
    pub fn cell(&self) -> Option<Cell> {
        (self.pos.0 % 1000 == 0 && self.pos.1 % 1000 == 0)
            .then_some(((self.pos.0 / 1000) as i32, (self.pos.1 / 1000) as i32))
    }

    pub fn position_millicells(&self) -> (i64, i64) {
        self.pos
    }

    pub fn queued(&self) -> Option<&Command> {
        self.queued.as_ref()
    }

    pub fn mission(&self) -> impl Iterator<Item = &Step> {
        self.mission.iter()
    }

    /// Idle with nothing left to do.
    pub fn is_quiescent(&self) -> bool {
        self.phase == Phase::Idle && self.mission.is_empty() && self.queued.is_none()
    }

    pub fn is_waiting_for_signal(&self) -> bool {
        self.mission.front() == Some(&Step::WaitSignal)
    }

    fn busy(&self) -> bool {
        self.phase != Phase::Idle || !self.mission.is_empty()
    }

    /// Flat state reported to the shadow.
    pub fn reported_state(&self, world: &WorldConfig) -> StateMap {
        let mut m = StateMap::new();
        m.insert("status".into(), self.status.clone().into());
        m.insert("phase".into(), self.phase.to_string().into());
        m.insert(
            "cargo".into(),
            match self.cargo {
                Some(p) => format!("package-{}", p.id).into(),
                None => "none".into(),
            },
        );
        let zone = self
            .cell()
            .and_then(|c| world.zone_at(c))
            .map(|z| z.as_str())
            .unwrap_or("");
        m.insert("zone".into(), zone.into());
        m.insert("x".into(), Scalar::Int(self.pos.0 / 1000));
        m.insert("y".into(), Scalar::Int(self.pos.1 / 1000));
        m
    }

    fn set_phase(&mut self, phase: Phase, status: &str, out: &mut Vec<RobotOutput>) {
        if phase != self.phase || status != self.status {
            out.push(RobotOutput::PhaseChanged {
                from: self.phase,
                to: phase,
                status: status.to_string(),
            });
            self.phase = phase;
            self.status = status.to_string();
        }
    }

    /// Accepts a command payload addressed to this robot. Payloads naming
    /// another robot, or repeating an already-seen `cmd_id`, are ignored.
    pub fn receive(
        &mut self,
        world: &WorldConfig,
        payload: &StateMap,
        now: u64,
    ) -> Result<Vec<RobotOutput>, RobotError> {
        if let Some(target) = payload.get("robot").and_then(Scalar::as_int) {
            if target != i64::from(self.id) {
                return Ok(Vec::new());
            }
        }
        if let Some(cmd_id) = payload.get("cmd_id").and_then(Scalar::as_int) {
            if cmd_id <= self.last_cmd_id {
                return Ok(Vec::new());
            }
            self.last_cmd_id = cmd_id;
        }
        let command = Command::from_payload(payload)?;
        Ok(self.apply_command(world, command, now))
    }

    /// Applies a command. Busy robots queue it (depth one, newest wins);
    /// `stop` always acts immediately, and any command releases a stuck robot.
    pub fn apply_command(&mut self, world: &WorldConfig, command: Command, now: u64) -> Vec<RobotOutput> {
        let mut out = Vec::new();
        if command == Command::Stop {
            self.mission.clear();
            self.queued = None;
            self.timer_ms = 0;
            self.wait_deadline = None;
            self.set_phase(Phase::Idle, Phase::Idle.label(), &mut out);
            return out;
        }
        if self.phase == Phase::Stuck {
            self.mission.clear();
            self.queued = None;
            self.set_phase(Phase::Idle, Phase::Idle.label(), &mut out);
        } else if self.busy() {
            self.queued = Some(command);
            return out;
        }
        self.start(world, command, now, &mut out);
        out
    }

    fn start(&mut self, world: &WorldConfig, command: Command, now: u64, out: &mut Vec<RobotOutput>) {
        self.weather_attempts = 0;
        match command {
            Command::Navigate(zone) => {
                self.mission.extend([Step::GoTo(zone), Step::Auto]);
            }
            Command::WeatherNavigate => {
                self.mission.push_back(Step::AskWeather);
            }
            Command::SequentialDelivery {
                initiator,
                peer,
                zone,
            } => {
                let (initiator, peer) = if self.params.faults.swap_sequential_roles {
                    (peer, initiator)
                } else {
                    (initiator, peer)
                };
                if self.id == initiator {
                    let target = self.params.faults.initiator_zone.unwrap_or(zone);
                    self.mission.extend([
                        Step::GoTo(ZoneName::Loading),
                        Step::Load,
                        Step::GoTo(target),
                        Step::Unload,
                    ]);
                    if !self.params.faults.suppress_done_signal {
                        self.mission.push_back(Step::Signal);
                    }
                } else if self.id == peer {
                    if self.params.peer_preposition {
                        self.mission.extend([Step::GoTo(ZoneName::Loading), Step::WaitSignal]);
                    } else {
                        self.mission.extend([Step::WaitSignal, Step::GoTo(ZoneName::Loading)]);
                    }
                    self.mission
                        .extend([Step::Load, Step::GoTo(zone), Step::Unload]);
                } else {
                    return;
                }
            }
            Command::Stop => {}
        }
        self.continue_mission(world, now, false, out);
    }

    /// Runs instantaneous steps until the robot is waiting on time or input.
    fn continue_mission(&mut self, world: &WorldConfig, now: u64, delivered: bool, out: &mut Vec<RobotOutput>) {
        loop {
            let Some(step) = self.mission.front().cloned() else {
                let status = if delivered {
                    STATUS_TASK_COMPLETED
                } else {
                    Phase::Idle.label()
                };
                self.set_phase(Phase::Idle, status, out);
                if let Some(next) = self.queued.take() {
                    self.start(world, next, now, out);
                }
                return;
            };
            let here = self.cell().and_then(|c| world.zone_at(c));
            match step {
                Step::GoTo(zone) => {
                    if here == Some(zone) {
                        self.mission.pop_front();
                        continue;
                    }
                    self.set_phase(Phase::Navigating(zone), "Navigating", out);
                    return;
                }
                Step::Auto => {
                    self.mission.pop_front();
                    match (here, self.cargo) {
                        (Some(ZoneName::Loading), None) => self.mission.push_front(Step::Load),
                        (Some(z), Some(_)) if z != ZoneName::Loading => {
                            self.mission.push_front(Step::Unload)
                        }
                        _ => {}
                    }
                }
                Step::Load => {
                    if here != Some(ZoneName::Loading) || self.cargo.is_some() {
                        self.mission.pop_front();
                        continue;
                    }
                    self.timer_ms = world.load_ms();
                    out.push(RobotOutput::LoadStarted);
                    self.set_phase(Phase::Loading, "Loading", out);
                    return;
                }
                Step::Unload => {
                    if self.cargo.is_none() || here.is_none() {
                        self.mission.pop_front();
                        continue;
                    }
                    self.timer_ms = world.unload_ms();
                    self.set_phase(Phase::Unloading, "Unloading", out);
                    return;
                }
                Step::AskWeather => {
                    self.set_phase(Phase::AskingWeather, "AskingWeather", out);
                    out.push(RobotOutput::Say(WEATHER_QUESTION.to_string()));
                    return;
                }
                Step::WaitSignal => {
                    if self.wait_deadline.is_none() {
                        self.wait_deadline = Some(now + self.params.coordination_timeout_ms);
                    }
                    self.set_phase(Phase::Idle, STATUS_WAITING, out);
                    return;
                }
                Step::Signal => {
                    self.mission.pop_front();
                    let mut payload = StateMap::new();
                    payload.insert("kind".into(), "sequential_done".into());
                    payload.insert("from".into(), self.id.into());
                    out.push(RobotOutput::Publish {
                        topic: SEQUENTIAL_DONE_TOPIC.to_string(),
                        payload,
                    });
                }
            }
        }
    }

    /// Coordination go-signal from a peer.
    pub fn on_signal(&mut self, world: &WorldConfig, now: u64) -> Vec<RobotOutput> {
        let mut out = Vec::new();
        if self.is_waiting_for_signal() {
            self.mission.pop_front();
            self.wait_deadline = None;
            self.continue_mission(world, now, false, &mut out);
        }
        out
    }

    /// Feeds the recognized assistant reply to a robot asking about the weather.
    pub fn on_heard(&mut self, world: &WorldConfig, heard: &str, now: u64) -> Vec<RobotOutput> {
        let mut out = Vec::new();
        if self.phase != Phase::AskingWeather {
            return out;
        }
        let intent = lex_interpret(heard);
        let name = intent.name;
        out.push(RobotOutput::Heard(intent));
        let target = match name {
            RobotIntentName::SunnyWeather => ZoneName::A,
            RobotIntentName::RainyWeather => ZoneName::C,
            RobotIntentName::Unrecognized => {
                self.weather_attempts += 1;
                if self.weather_attempts > self.params.max_weather_retries {
                    self.mission.clear();
                    self.set_phase(Phase::Stuck, "Stuck", &mut out);
                } else {
                    out.push(RobotOutput::Say(WEATHER_QUESTION.to_string()));
                }
                return out;
            }
        };
        self.mission.pop_front();
        let mut steps = vec![Step::GoTo(ZoneName::Loading), Step::Load, Step::GoTo(target), Step::Unload];
        steps.extend(self.mission.drain(..));
        self.mission = steps.into();
        self.continue_mission(world, now, false, &mut out);
        out
    }

    /// Advances motion and timers by `dt` ms ending at `now`.
    pub fn advance(&mut self, world: &WorldConfig, now: u64, dt: u64) -> Vec<RobotOutput> {
        let mut out = Vec::new();
        match self.phase {
            Phase::Navigating(zone) => {
                let budget_scaled = world.speed_millicells_per_s() * dt + self.move_carry;
                let mut budget = (budget_scaled / 1000) as i64;
                self.move_carry = budget_scaled % 1000;
                let (tx, ty) = world.center(zone);
                let target = (i64::from(tx) * 1000, i64::from(ty) * 1000);
                let step_x = (target.0 - self.pos.0).clamp(-budget, budget);
                self.pos.0 += step_x;
                budget -= step_x.abs();
                let step_y = (target.1 - self.pos.1).clamp(-budget, budget);
                self.pos.1 += step_y;
                if self.pos == target {
                    self.move_carry = 0;
                    self.mission.pop_front();
                    self.continue_mission(world, now, false, &mut out);
                }
            }
            Phase::Loading | Phase::Unloading => {
                self.timer_ms = self.timer_ms.saturating_sub(dt);
                if self.timer_ms == 0 {
                    self.mission.pop_front();
                    let delivered = if self.phase == Phase::Loading {
                        self.packages_loaded += 1;
                        let next_target = self.mission.iter().find_map(|s| match s {
                            Step::GoTo(z) => Some(*z),
                            _ => None,
                        });
                        let package = Package {
                            id: self.id * 1000 + self.packages_loaded,
                            zone_tag: next_target,
                        };
                        self.cargo = Some(package);
                        out.push(RobotOutput::Loaded(package));
                        false
                    } else {
                        let zone = self
                            .cell()
                            .and_then(|c| world.zone_at(c))
                            .expect("unloading happens at a zone");
                        if let Some(package) = self.cargo.take() {
                            out.push(RobotOutput::Delivered { zone, package });
                        }
                        true
                    };
                    self.continue_mission(world, now, delivered, &mut out);
                }
            }
            Phase::Idle => {
                if let Some(deadline) = self.wait_deadline {
                    if self.is_waiting_for_signal() && now >= deadline {
                        self.wait_deadline = None;
                        self.mission.clear();
                        out.push(RobotOutput::CoordinationTimeout);
                        self.set_phase(Phase::Stuck, "Stuck", &mut out);
                    }
                }
            }
            Phase::AskingWeather | Phase::Stuck => {}
        }
        out
    }
}

/// Advances every robot by `dt`, returning outputs tagged with robot ids.
pub fn tick(world: &WorldConfig, robots: &mut [Robot], now: u64, dt: u64) -> Vec<(u32, RobotOutput)> {
    robots
        .iter_mut()
        .flat_map(|r| {
            let id = r.id;
            r.advance(world, now, dt).into_iter().map(move |o| (id, o))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_map;

    fn world() -> WorldConfig {
        WorldConfig::default()
    }

    fn run_until_quiet(world: &WorldConfig, robot: &mut Robot, start: u64, limit_ms: u64) -> (u64, Vec<RobotOutput>) {
        let mut all = Vec::new();
        let mut now = start;
        while now < start + limit_ms {
            now += 100;
            all.extend(robot.advance(world, now, 100));
            if robot.is_quiescent() || robot.phase == Phase::Stuck {
                break;
            }
        }
        (now, all)
    }

    #[test]
    fn idle_navigate_to_loading() {
        let w = world();
        let mut r = Robot::new(1, (8, 4), RobotParams::default());
        let out = r.apply_command(&w, Command::Navigate(ZoneName::Loading), 0);
        assert_eq!(r.phase, Phase::Navigating(ZoneName::Loading));
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn stuck_plus_stop_is_idle() {
        let w = world();
        let mut r = Robot::new(1, (8, 4), RobotParams::default());
        r.phase = Phase::Stuck;
        r.apply_command(&w, Command::Stop, 0);
        assert_eq!(r.phase, Phase::Idle);
    }

    #[test]
    fn queued_command_runs_after_arrival() {
        let w = world();
        let mut r = Robot::new(1, (2, 12), RobotParams::default());
        r.apply_command(&w, Command::Navigate(ZoneName::A), 0);
        r.apply_command(&w, Command::Navigate(ZoneName::C), 0);
        r.apply_command(&w, Command::Navigate(ZoneName::B), 0);
        assert_eq!(r.queued(), Some(&Command::Navigate(ZoneName::B)));
        let mut now = 0;
        while r.cell() != Some((2, 17)) {
            now += 100;
            r.advance(&w, now, 100);
        }
        assert_eq!(r.phase, Phase::Navigating(ZoneName::B));
        assert!(r.queued().is_none());
    }

    #[test]
    fn five_cells_then_unload() {
        let w = world();
        let mut r = Robot::new(1, (2, 12), RobotParams::default());
        r.cargo = Some(Package { id: 1, zone_tag: None });
        r.apply_command(&w, Command::Navigate(ZoneName::A), 0);
        let (t, out) = run_until_quiet(&w, &mut r, 0, 60_000);
        assert_eq!(t, 5_000 + 3_000);
        assert_eq!(r.status, STATUS_TASK_COMPLETED);
        assert!(out.iter().any(|o| matches!(o, RobotOutput::Delivered { zone: ZoneName::A, .. })));
    }

    #[test]
    fn idle_tick_is_silent() {
        let w = world();
        let mut r = Robot::new(1, (8, 4), RobotParams::default());
        let before = r.clone();
        assert!(r.advance(&w, 100, 100).is_empty());
        assert_eq!(r, before);
    }

    #[test]
    fn malformed_commands() {
        assert!(Command::from_payload(&state_map! {"kind" => "dance"}).is_err());
        assert!(Command::from_payload(&state_map! {"kind" => "navigate"}).is_err());
        assert!(Command::from_payload(&state_map! {"kind" => "navigate", "zone" => "E"}).is_err());
        assert!(Command::from_payload(&StateMap::new()).is_err());
        assert_eq!(
            Command::from_payload(&state_map! {"kind" => "navigate", "zone" => "Loading"}).unwrap(),
            Command::Navigate(ZoneName::Loading)
        );
    }

    #[test]
    fn payload_for_other_robot_ignored_and_cmd_ids_deduplicated() {
        let w = world();
        let mut r = Robot::new(1, (8, 4), RobotParams::default());
        let other = state_map! {"kind" => "navigate", "zone" => "A", "robot" => 2i64};
        assert!(r.receive(&w, &other, 0).unwrap().is_empty());
        let mine = state_map! {"kind" => "navigate", "zone" => "A", "robot" => 1i64, "cmd_id" => 4i64};
        assert!(!r.receive(&w, &mine, 0).unwrap().is_empty());
        r.apply_command(&w, Command::Stop, 0);
        assert!(r.receive(&w, &mine, 0).unwrap().is_empty());
    }

    #[test]
    fn weather_flow_sunny_goes_to_a() {
        let w = world();
        let mut r = Robot::new(1, (8, 4), RobotParams::default());
        let out = r.apply_command(&w, Command::WeatherNavigate, 0);
        assert!(out.contains(&RobotOutput::Say(WEATHER_QUESTION.into())));
        let out = r.on_heard(&w, "The weather today is sunny.", 3_000);
        assert!(matches!(out[0], RobotOutput::Heard(RobotIntent { name: RobotIntentName::SunnyWeather, .. })));
        assert_eq!(r.phase, Phase::Navigating(ZoneName::Loading));
        let (_, out) = run_until_quiet(&w, &mut r, 3_000, 120_000);
        assert!(out.iter().any(|o| matches!(o, RobotOutput::Delivered { zone: ZoneName::A, .. })));
    }

    #[test]
    fn weather_flow_gives_up_after_retries() {
        let w = world();
        let mut r = Robot::new(1, (8, 4), RobotParams::default());
        r.apply_command(&w, Command::WeatherNavigate, 0);
        let mut says = 1;
        for _ in 0..3 {
            says += r
                .on_heard(&w, "the weather today", 0)
                .iter()
                .filter(|o| matches!(o, RobotOutput::Say(_)))
                .count();
        }
        assert_eq!(says, 3);
        assert_eq!(r.phase, Phase::Stuck);
    }

    #[test]
    fn peer_times_out_without_signal() {
        let w = world();
        let params = RobotParams {
            coordination_timeout_ms: 1_000,
            ..RobotParams::default()
        };
        let mut peer = Robot::new(2, (12, 4), params);
        peer.apply_command(
            &w,
            Command::SequentialDelivery {
                initiator: 1,
                peer: 2,
                zone: ZoneName::D,
            },
            0,
        );
        assert!(peer.is_waiting_for_signal());
        let (_, out) = run_until_quiet(&w, &mut peer, 0, 5_000);
        assert!(out.contains(&RobotOutput::CoordinationTimeout));
        assert_eq!(peer.phase, Phase::Stuck);
    }
}
