//! Discrete-event execution of a scenario.
//!
//! Events are ordered by `(time, class, seq)`. External input has class 0,
//! so a frame injected at `t` is applied before anything else scheduled at
//! `t`. Each event handler may log records and schedule further events; no
//! other state is shared between agents.

use crate::assistant::{Assistant, AssistantError, Services, Weather, WeatherSkill};
use crate::broker::Broker;
use crate::metrics::rates::{sequential_led, task_succeeded};
use crate::metrics::{InteractionKind, LogRecord, MetricsReport, RunHeader, TaskExpectation, TaskId};
use crate::robots::{
    thing_id, Command, Phase, Robot, RobotFaults, RobotOutput, RobotParams, WorldConfig, ZoneName,
    SEQUENTIAL_DONE_TOPIC,
};
use crate::shadow::{ShadowDocument, ShadowStore, StatePatch};
use crate::value::{Scalar, StateMap};
use crate::voice_link::{Utterance, VoiceLink};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use super::config::{OperatorMode, Scenario, TransportMode};
use super::operator::{OperatorAction, OperatorView, ScriptedOperator, OPERATOR_WEATHER_QUESTION};
use super::rng::{derive_stream, MISHEAR_STREAM, WEATHER_STREAM, ZONES_STREAM};

pub const ASSISTANT_ID: &str = "alexa";
pub const OPERATOR_ID: &str = "operator";

/// Logical time between state frames in live sessions.
pub const STATE_FRAME_INTERVAL_MS: u64 = 500;

/// Frames a live client sends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputFrame {
    Intent { text: String },
    Puzzle { piece_id: u32 },
    Start,
    Abort,
    /// Recorded by the gateway when the client goes away.
    Disconnect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotView {
    pub id: u32,
    pub phase: String,
    pub status: String,
    pub x: i64,
    pub y: i64,
    pub cargo: Option<u32>,
}

/// Frames sent to a live client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum OutputFrame {
    State {
        sim_time: u64,
        robots: Vec<RobotView>,
        shadows: Vec<ShadowDocument>,
    },
    Speech {
        from: String,
        text: String,
    },
    Metrics(Box<MetricsReport>),
    Brief {
        #[serde(with = "crate::value::robot_keys")]
        zone_assignments: BTreeMap<u32, ZoneName>,
    },
    Error {
        code: String,
        msg: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Speaker {
    Operator,
    Robot(u32),
}

#[derive(Debug, Clone, PartialEq)]
enum Event {
    Input(InputFrame),
    ShadowReport { robot: u32, state: StateMap },
    BrokerDrain,
    ShadowPoll { robot: u32 },
    VoiceHeard(Utterance),
    UtteranceEnd { robot: u32 },
    /// Assistant acts on text it heard; `command` marks an operator command
    /// whose acknowledgement closes an interaction.
    AssistantText {
        speaker: Speaker,
        text: String,
        robot: Option<u32>,
        command: bool,
    },
    Teleop { robot: u32, zone: ZoneName },
    OperatorDecide,
    PuzzlePiece { generation: u64 },
    Tick,
}

impl Event {
    fn class(&self) -> u8 {
        match self {
            Event::Input(_) => 0,
            Event::ShadowReport { .. }
            | Event::BrokerDrain
            | Event::ShadowPoll { .. }
            | Event::VoiceHeard(_)
            | Event::UtteranceEnd { .. } => 1,
            Event::AssistantText { .. } | Event::Teleop { .. } => 2,
            Event::OperatorDecide | Event::PuzzlePiece { .. } => 3,
            Event::Tick => 4,
        }
    }
}

#[derive(Debug)]
struct Scheduled {
    time: u64,
    class: u8,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl Scheduled {
    fn key(&self) -> (u64, u8, u64) {
        (self.time, self.class, self.seq)
    }
}

/// How the run ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEnd {
    pub complete: bool,
    pub reason: String,
    pub sim_time: u64,
}

pub const END_ALL_TASKS: &str = "all tasks complete";
pub const END_TIMEOUT: &str = "timeout";
pub const END_ABORTED: &str = "aborted";
pub const END_ABANDONED: &str = "session abandoned";

/// Draws one distinct delivery zone per robot.
pub fn assign_zones(robots: &[u32], zone_seed: u64) -> BTreeMap<u32, ZoneName> {
    let mut zones = ZoneName::DELIVERY.to_vec();
    zones.shuffle(&mut derive_stream(zone_seed, ZONES_STREAM));
    robots.iter().copied().zip(zones).collect()
}

pub struct Simulation {
    scenario: Scenario,
    seed: u64,
    mode: OperatorMode,
    world: WorldConfig,
    broker: Broker,
    shadows: ShadowStore,
    assistant: Assistant,
    voice: VoiceLink,
    robots: BTreeMap<u32, Robot>,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    now: u64,
    log: Vec<LogRecord>,
    expectations: Vec<TaskExpectation>,
    task_index: Option<usize>,
    tasks_started: bool,
    task_delivered: BTreeSet<u32>,
    task_failure: Option<String>,
    assignments: BTreeMap<u32, ZoneName>,
    operator: Option<ScriptedOperator>,
    operator_busy: bool,
    decide_pending: bool,
    pending_drive: Option<u32>,
    puzzle_generation: u64,
    puzzle_running: bool,
    known_weather: Option<Weather>,
    episodes: BTreeSet<u32>,
    end: Option<RunEnd>,
    collect_frames: bool,
    outbox: Vec<OutputFrame>,
    next_state_frame: u64,
    reported_updates: u64,
}

impl Simulation {
    pub fn new(scenario: &Scenario, seed: u64) -> Simulation {
        let file = &scenario.file;
        let mode = file.operator;
        let robot_ids = scenario.robot_ids();
        let assignments = assign_zones(&robot_ids, file.zone_seed.unwrap_or(seed));

        let route = match file.command_transport.mode {
            TransportMode::Mqtt => crate::assistant::CommandRoute::Broker,
            TransportMode::ShadowPoll => crate::assistant::CommandRoute::ShadowDesired,
        };
        let assistant = Assistant::new(
            scenario.skill_model.clone(),
            robot_ids.clone(),
            WeatherSkill::new(derive_stream(seed, WEATHER_STREAM)),
        )
        .with_topic_overrides(file.intent_topics.clone())
        .with_route(route)
        .with_staleness(file.staleness_ms);

        let mut voice = VoiceLink::new(
            file.latencies.speech_ms,
            file.p_mishear,
            derive_stream(seed, MISHEAR_STREAM),
        );
        let params = RobotParams {
            coordination_timeout_ms: file.coordination_timeout_s * 1000,
            max_weather_retries: file.max_weather_retries,
            peer_preposition: file.peer_preposition,
            faults: RobotFaults {
                swap_sequential_roles: file.faults.task3_reverse_order,
                initiator_zone: file.faults.task3_initiator_zone,
                suppress_done_signal: file.faults.drop_coordination_signal,
            },
        };
        let mut robots = BTreeMap::new();
        for spec in &file.robots {
            voice.colocate(&thing_id(spec.id), ASSISTANT_ID);
            robots.insert(spec.id, Robot::new(spec.id, spec.start, params.clone()));
        }

        let expectations = file
            .tasks
            .iter()
            .map(|task| match task {
                TaskId::I => TaskExpectation::Zones {
                    task: TaskId::I,
                    zones: assignments.clone(),
                },
                TaskId::II => TaskExpectation::Weather {
                    task: TaskId::II,
                    robots: robot_ids.clone(),
                },
                TaskId::III => TaskExpectation::Sequential {
                    task: TaskId::III,
                    initiator: 1,
                    peer: 2,
                    zone: ZoneName::D,
                },
            })
            .collect();

        let operator = match mode {
            OperatorMode::Live => None,
            _ => Some(ScriptedOperator::new(
                mode,
                robot_ids.clone(),
                assignments.clone(),
                file.faults.clone(),
            )),
        };

        let mut sim = Simulation {
            scenario: scenario.clone(),
            seed,
            mode,
            world: file.world.clone(),
            broker: Broker::new(file.latencies.broker_ms),
            shadows: ShadowStore::new(),
            assistant,
            voice,
            robots,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0,
            log: Vec::new(),
            expectations,
            task_index: None,
            tasks_started: false,
            task_delivered: BTreeSet::new(),
            task_failure: None,
            assignments,
            operator,
            operator_busy: false,
            decide_pending: false,
            pending_drive: None,
            puzzle_generation: 0,
            puzzle_running: false,
            known_weather: None,
            episodes: BTreeSet::new(),
            end: None,
            collect_frames: false,
            outbox: Vec::new(),
            next_state_frame: 0,
            reported_updates: 0,
        };
        sim.initialize();
        sim
    }

    fn initialize(&mut self) {
        let file = self.scenario.file.clone();
        self.log.push(LogRecord::RunStart(RunHeader {
            scenario_hash: self.scenario.hash(),
            seed: self.seed,
            method: self.mode.method().to_string(),
            robots: self.scenario.robot_ids(),
            tasks: self.expectations.clone(),
            trust: file.resolved_trust(),
            tlx: file.tlx_response,
        }));

        let poll = file.command_transport.mode == TransportMode::ShadowPoll;
        let interval = file.command_transport.interval_ms;
        let ids: Vec<u32> = self.robots.keys().copied().collect();
        for id in ids {
            let thing = thing_id(id);
            self.shadows.register(&thing).expect("robot ids are unique");
            let state = self.robots[&id].reported_state(&self.world);
            self.write_reported(id, state);
            let filters = if poll {
                vec![SEQUENTIAL_DONE_TOPIC.to_string()]
            } else {
                vec![format!("vahr/robot/{id}/cmd"), "vahr/cmd/#".into(), "vahr/coord/#".into()]
            };
            for filter in filters {
                self.broker.subscribe(&thing, &filter).expect("static filters are valid");
            }
            if poll {
                self.schedule(interval, Event::ShadowPoll { robot: id });
            }
        }

        self.log.push(LogRecord::Brief {
            assignments: self.assignments.clone(),
            sim_time: 0,
        });
        self.schedule(file.tick_ms, Event::Tick);
        if self.mode != OperatorMode::Live {
            self.start_tasks();
        }
    }

    /// Collect outbound frames for a live client.
    pub fn enable_frames(&mut self) {
        self.collect_frames = true;
        self.outbox.push(OutputFrame::Brief {
            zone_assignments: self.assignments.clone(),
        });
        let frame = self.state_frame();
        self.outbox.push(frame);
    }

    pub fn take_frames(&mut self) -> Vec<OutputFrame> {
        std::mem::take(&mut self.outbox)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn end(&self) -> Option<&RunEnd> {
        self.end.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.end.is_some()
    }

    pub fn assignments(&self) -> &BTreeMap<u32, ZoneName> {
        &self.assignments
    }

    pub fn shadows(&self) -> &ShadowStore {
        &self.shadows
    }

    /// Reported-state writes robots have made.
    pub fn reported_updates(&self) -> u64 {
        self.reported_updates
    }

    pub fn published_count(&self) -> u64 {
        self.broker.published_count()
    }

    pub fn robot(&self, id: u32) -> Option<&Robot> {
        self.robots.get(&id)
    }

    pub fn into_log(self) -> Vec<LogRecord> {
        self.log
    }

    fn schedule(&mut self, time: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse(Scheduled {
            time,
            class: event.class(),
            seq: self.seq,
            event,
        }));
    }

    /// Applies `frame` just after the current instant.
    pub fn inject(&mut self, frame: InputFrame) -> u64 {
        let at = self.now + 1;
        self.schedule(at, Event::Input(frame));
        at
    }

    /// Schedules `frame` at an exact logical time (used by replay).
    pub fn inject_at(&mut self, at: u64, frame: InputFrame) {
        self.schedule(at, Event::Input(frame));
    }

    /// Processes the next event. Returns false once the run has ended.
    pub fn step(&mut self) -> bool {
        if self.end.is_some() {
            return false;
        }
        let Some(Reverse(next)) = self.queue.pop() else {
            self.finish(false, "event queue exhausted");
            return false;
        };
        self.now = next.time;
        self.dispatch(next.event);
        self.end.is_none()
    }

    /// Processes every event scheduled at or before `t`.
    pub fn run_until(&mut self, t: u64) {
        while self.end.is_none() {
            match self.queue.peek() {
                Some(Reverse(next)) if next.time <= t => {
                    self.step();
                }
                _ => break,
            }
        }
        if self.end.is_none() {
            self.now = self.now.max(t);
        }
    }

    pub fn run_to_end(&mut self) {
        while self.step() {}
    }

    fn interaction(&mut self, kind: InteractionKind, robot: Option<u32>) {
        self.log.push(LogRecord::interaction(kind, robot, self.now));
    }

    fn current_task(&self) -> Option<TaskId> {
        self.task_index
            .and_then(|i| self.expectations.get(i))
            .map(TaskExpectation::task)
    }

    fn dispatch(&mut self, event: Event) {
        // a decision that found nothing to do must not re-trigger itself
        let may_decide = !matches!(event, Event::OperatorDecide | Event::PuzzlePiece { .. });
        match event {
            Event::Input(frame) => self.on_input(frame),
            Event::ShadowReport { robot, state } => self.write_reported(robot, state),
            Event::BrokerDrain => self.on_broker_drain(),
            Event::ShadowPoll { robot } => self.on_shadow_poll(robot),
            Event::VoiceHeard(utterance) => self.on_voice_heard(utterance),
            Event::UtteranceEnd { robot } => self.interaction(InteractionKind::UtteranceEnd, Some(robot)),
            Event::AssistantText {
                speaker,
                text,
                robot,
                command,
            } => self.on_assistant_text(speaker, &text, robot, command),
            Event::Teleop { robot, zone } => {
                if let Some(r) = self.robots.get_mut(&robot) {
                    let out = r.apply_command(&self.world, Command::Navigate(zone), self.now);
                    self.handle_outputs(robot, out);
                    self.after_robot_activity(robot);
                }
            }
            Event::OperatorDecide => {
                self.decide_pending = false;
                self.operator_decide();
            }
            Event::PuzzlePiece { generation } => self.on_puzzle_piece(generation),
            Event::Tick => self.on_tick(),
        }
        self.check_task_progress();
        if may_decide
            && self.operator.is_some()
            && !self.operator_busy
            && !self.decide_pending
            && self.end.is_none()
        {
            self.decide_pending = true;
            self.schedule(self.now, Event::OperatorDecide);
        }
    }

    fn on_input(&mut self, frame: InputFrame) {
        self.log.push(LogRecord::Input {
            frame: serde_json::to_value(&frame).expect("frames serialize"),
            sim_time: self.now,
        });
        match frame {
            InputFrame::Start => {
                if !self.tasks_started {
                    self.start_tasks();
                }
            }
            InputFrame::Intent { text } => {
                let robot = self.assistant.interpret(&text).ok().and_then(|i| i.robot());
                self.interaction(InteractionKind::CommandStart, robot);
                let at = self.now + self.scenario.file.latencies.assistant_ms;
                self.schedule(
                    at,
                    Event::AssistantText {
                        speaker: Speaker::Operator,
                        text,
                        robot,
                        command: true,
                    },
                );
            }
            InputFrame::Puzzle { .. } => self.interaction(InteractionKind::PuzzlePiecePlaced, None),
            InputFrame::Abort => self.finish(false, END_ABORTED),
            InputFrame::Disconnect => self.finish(false, END_ABANDONED),
        }
    }

    fn write_reported(&mut self, robot: u32, state: StateMap) {
        self.shadows.set_time(self.now);
        match self.shadows.update_reported(&thing_id(robot), &StatePatch::from(state)) {
            Ok(document) => {
                self.reported_updates += 1;
                self.log.push(LogRecord::Shadow {
                    document,
                    sim_time: self.now,
                });
            }
            Err(e) => self.log_error("ShadowError", &e.to_string()),
        }
    }

    fn log_error(&mut self, code: &str, msg: &str) {
        self.log.push(LogRecord::Error {
            code: code.to_string(),
            msg: msg.to_string(),
            sim_time: self.now,
        });
        if self.collect_frames {
            self.outbox.push(OutputFrame::Error {
                code: code.to_string(),
                msg: msg.to_string(),
            });
        }
    }

    fn speech(&mut self, from: &str, text: &str) {
        self.log.push(LogRecord::Speech {
            from: from.to_string(),
            text: text.to_string(),
            sim_time: self.now,
        });
        if self.collect_frames {
            self.outbox.push(OutputFrame::Speech {
                from: from.to_string(),
                text: text.to_string(),
            });
        }
    }

    fn on_broker_drain(&mut self) {
        if self.broker.set_time(self.now).is_err() {
            return;
        }
        let ids: Vec<u32> = self.robots.keys().copied().collect();
        for id in ids {
            let thing = thing_id(id);
            let messages = match self.broker.drain(&thing) {
                Ok(m) => m,
                Err(_) => continue,
            };
            if messages.is_empty() {
                continue;
            }
            for message in messages {
                if message.publisher_id == thing {
                    continue;
                }
                self.deliver_payload(id, &message.payload);
            }
            self.after_robot_activity(id);
        }
    }

    fn deliver_payload(&mut self, id: u32, payload: &StateMap) {
        let is_signal = payload.get("kind").and_then(Scalar::as_str) == Some("sequential_done");
        let Some(robot) = self.robots.get_mut(&id) else {
            return;
        };
        let out = if is_signal {
            Ok(robot.on_signal(&self.world, self.now))
        } else {
            robot.receive(&self.world, payload, self.now)
        };
        match out {
            Ok(out) => self.handle_outputs(id, out),
            Err(e) => self.log_error("MalformedCommand", &e.to_string()),
        }
    }

    fn on_shadow_poll(&mut self, id: u32) {
        if let Ok(doc) = self.shadows.get_shadow(&thing_id(id)) {
            if doc.desired.contains_key("kind") {
                self.deliver_payload(id, &doc.desired);
                self.after_robot_activity(id);
            }
        }
        let at = self.now + self.scenario.file.command_transport.interval_ms;
        self.schedule(at, Event::ShadowPoll { robot: id });
    }

    fn on_voice_heard(&mut self, utterance: Utterance) {
        let heard = self.voice.recognize(&utterance);
        if utterance.listener == ASSISTANT_ID {
            let robot = self
                .robots
                .keys()
                .copied()
                .find(|id| thing_id(*id) == utterance.speaker);
            let Some(robot) = robot else {
                return;
            };
            let at = self.now + self.scenario.file.latencies.assistant_ms;
            self.schedule(
                at,
                Event::AssistantText {
                    speaker: Speaker::Robot(robot),
                    text: heard,
                    robot: Some(robot),
                    command: false,
                },
            );
            return;
        }
        let listener = self
            .robots
            .keys()
            .copied()
            .find(|id| thing_id(*id) == utterance.listener);
        if let Some(id) = listener {
            let robot = self.robots.get_mut(&id).expect("listener exists");
            let out = robot.on_heard(&self.world, &heard, self.now);
            self.handle_outputs(id, out);
            self.after_robot_activity(id);
        }
    }

    fn on_assistant_text(&mut self, speaker: Speaker, text: &str, robot: Option<u32>, command: bool) {
        let source = match speaker {
            Speaker::Operator => OPERATOR_ID.to_string(),
            Speaker::Robot(id) => thing_id(id),
        };
        let interpreted = self.assistant.interpret(text);
        self.log.push(LogRecord::Intent {
            source: source.clone(),
            text: text.to_string(),
            intent: interpreted.as_ref().ok().cloned(),
            error: interpreted.as_ref().err().map(|e| e.code().to_string()),
            sim_time: self.now,
        });

        let outcome = interpreted.and_then(|intent| {
            let mut services = Services {
                broker: &mut self.broker,
                shadows: &mut self.shadows,
                now: self.now,
            };
            let handled = self.assistant.handle_intent(&intent, &mut services)?;
            Ok((intent, handled))
        });

        let reply = match outcome {
            Ok((intent, handled)) => {
                if let Some(receipt) = &handled.receipt {
                    let m = &receipt.message;
                    self.log.push(LogRecord::Publish {
                        publisher: m.publisher_id.clone(),
                        topic: m.topic.to_string(),
                        seq: m.seq,
                        delivery_count: receipt.delivery_count,
                        payload: m.payload.clone(),
                        sim_time: self.now,
                    });
                    let at = self.now + self.broker.latency_ms();
                    self.schedule(at, Event::BrokerDrain);
                }
                for document in handled.desired_writes {
                    self.log.push(LogRecord::Shadow {
                        document,
                        sim_time: self.now,
                    });
                }
                if let (Some(w), Some(task)) = (handled.weather, self.current_task()) {
                    self.log.push(LogRecord::Weather {
                        phase: task.as_str().to_string(),
                        value: w,
                        sim_time: self.now,
                    });
                    if speaker == Speaker::Operator {
                        self.known_weather = Some(w);
                    }
                }
                if command {
                    self.interaction(InteractionKind::CommandAck, robot);
                    for r in self.assistant.addressed_robots(&intent) {
                        if self.episodes.insert(r) {
                            self.interaction(InteractionKind::RobotAutonomousStart, Some(r));
                        }
                    }
                }
                handled.response.text
            }
            Err(e) => {
                self.log_error(e.code(), &e.to_string());
                match e {
                    AssistantError::NoIntentMatched(_) | AssistantError::AmbiguousIntent { .. } => {
                        "Sorry, I didn't understand that.".to_string()
                    }
                    _ => "Sorry, I couldn't do that.".to_string(),
                }
            }
        };

        match speaker {
            Speaker::Operator => {
                self.speech(ASSISTANT_ID, &reply);
                self.operator_busy = false;
            }
            Speaker::Robot(id) => match self.voice.reply(ASSISTANT_ID, &thing_id(id), &reply, self.now) {
                Ok(utterance) => {
                    self.speech(ASSISTANT_ID, &reply);
                    self.log_utterance(&utterance);
                    self.schedule(utterance.heard_at, Event::VoiceHeard(utterance));
                }
                Err(e) => self.log_error("VoiceError", &e.to_string()),
            },
        }
    }

    fn log_utterance(&mut self, u: &Utterance) {
        self.log.push(LogRecord::Utterance {
            speaker: u.speaker.clone(),
            listener: u.listener.clone(),
            text: u.text.clone(),
            spoken_at: u.spoken_at,
            heard_at: u.heard_at,
        });
    }

    fn handle_outputs(&mut self, id: u32, outputs: Vec<RobotOutput>) {
        let task = self.current_task();
        for output in outputs {
            match output {
                RobotOutput::PhaseChanged { to, .. } => {
                    let state = self.robots[&id].reported_state(&self.world);
                    let at = self.now + self.scenario.file.latencies.shadow_ms;
                    self.schedule(at, Event::ShadowReport { robot: id, state });
                    if to == Phase::Stuck {
                        if self.episodes.remove(&id) {
                            self.interaction(InteractionKind::RobotStuck, Some(id));
                        }
                        if task.is_some() && self.task_failure.is_none() {
                            self.task_failure = Some(format!("placebot{id} stuck"));
                        }
                    }
                }
                RobotOutput::LoadStarted => self.log.push(LogRecord::LoadStart {
                    robot_id: id,
                    task,
                    sim_time: self.now,
                }),
                RobotOutput::Loaded(_) => {}
                RobotOutput::Delivered { zone, package } => {
                    self.log.push(LogRecord::Delivery {
                        robot_id: id,
                        zone,
                        package: package.id,
                        task,
                        sim_time: self.now,
                    });
                    self.task_delivered.insert(id);
                }
                RobotOutput::Say(text) => match self.voice.say(&thing_id(id), &text, self.now) {
                    Ok(utterance) => {
                        self.log_utterance(&utterance);
                        self.schedule(utterance.heard_at, Event::VoiceHeard(utterance));
                    }
                    Err(e) => self.log_error("VoiceChannelUnavailable", &e.to_string()),
                },
                RobotOutput::Heard(intent) => self.log.push(LogRecord::Exchange {
                    robot_id: id,
                    heard: intent.source_text,
                    recognized: intent.name,
                    sim_time: self.now,
                }),
                RobotOutput::Publish { topic, payload } => {
                    let _ = self.broker.set_time(self.now);
                    match self.broker.publish(&thing_id(id), &topic, payload) {
                        Ok(receipt) => {
                            let m = &receipt.message;
                            self.log.push(LogRecord::Publish {
                                publisher: m.publisher_id.clone(),
                                topic: m.topic.to_string(),
                                seq: m.seq,
                                delivery_count: receipt.delivery_count,
                                payload: m.payload.clone(),
                                sim_time: self.now,
                            });
                            let at = self.now + self.broker.latency_ms();
                            self.schedule(at, Event::BrokerDrain);
                        }
                        Err(e) => self.log_error("BrokerError", &e.to_string()),
                    }
                }
                RobotOutput::CoordinationTimeout => {
                    self.log_error("CoordinationTimeout", &format!("placebot{id} never got the go-signal"))
                }
            }
        }
    }

    /// Closes teleop legs and autonomy episodes after a robot changed.
    fn after_robot_activity(&mut self, id: u32) {
        let Some(robot) = self.robots.get(&id) else {
            return;
        };
        let navigating = matches!(robot.phase, Phase::Navigating(_));
        let quiescent = robot.is_quiescent();
        if self.pending_drive == Some(id) && !navigating {
            self.pending_drive = None;
            self.operator_busy = false;
            self.interaction(InteractionKind::CommandAck, Some(id));
            if !quiescent && self.episodes.insert(id) {
                self.interaction(InteractionKind::RobotAutonomousStart, Some(id));
            }
        }
        if quiescent && self.episodes.remove(&id) {
            self.interaction(InteractionKind::RobotIdle, Some(id));
        }
    }

    fn on_tick(&mut self) {
        let tick = self.scenario.file.tick_ms;
        let ids: Vec<u32> = self.robots.keys().copied().collect();
        for id in ids {
            let robot = self.robots.get_mut(&id).expect("id from keys");
            let out = robot.advance(&self.world, self.now, tick);
            if !out.is_empty() {
                self.handle_outputs(id, out);
                self.after_robot_activity(id);
            }
        }
        if self.collect_frames && self.now >= self.next_state_frame {
            let frame = self.state_frame();
            self.outbox.push(frame);
            self.next_state_frame = self.now + STATE_FRAME_INTERVAL_MS;
        }
        if self.now >= self.scenario.file.timeout_s * 1000 {
            self.finish(false, END_TIMEOUT);
            return;
        }
        self.schedule(self.now + tick, Event::Tick);
    }

    fn state_frame(&self) -> OutputFrame {
        OutputFrame::State {
            sim_time: self.now,
            robots: self
                .robots
                .values()
                .map(|r| {
                    let (x, y) = r.position_millicells();
                    RobotView {
                        id: r.id,
                        phase: r.phase.to_string(),
                        status: r.status.clone(),
                        x: x / 1000,
                        y: y / 1000,
                        cargo: r.cargo.map(|p| p.id),
                    }
                })
                .collect(),
            shadows: self.shadows.documents().cloned().collect(),
        }
    }

    fn start_tasks(&mut self) {
        self.tasks_started = true;
        self.advance_task();
    }

    fn advance_task(&mut self) {
        let next = self.task_index.map_or(0, |i| i + 1);
        self.task_index = Some(next);
        let Some(expectation) = self.expectations.get(next) else {
            self.finish(true, END_ALL_TASKS);
            return;
        };
        let task = expectation.task();
        self.task_delivered.clear();
        self.task_failure = None;
        self.known_weather = None;
        self.assistant.set_phase(task.as_str());
        self.log.push(LogRecord::TaskStart {
            task,
            sim_time: self.now,
        });
        if let Some(op) = self.operator.as_mut() {
            op.plan(task);
        }
    }

    fn check_task_progress(&mut self) {
        if self.end.is_some() {
            return;
        }
        let Some(expectation) = self.task_index.and_then(|i| self.expectations.get(i)).cloned() else {
            return;
        };
        let robots = expectation.robots();
        let settled = |r: &u32| {
            self.robots
                .get(r)
                .is_some_and(|robot| robot.is_quiescent() || robot.phase == Phase::Stuck)
        };
        let all_done = robots
            .iter()
            .all(|r| self.task_delivered.contains(r) && self.robots.get(r).is_some_and(Robot::is_quiescent));
        // a failed task still lets the other robots finish their missions
        let reason = match &self.task_failure {
            Some(failure) if robots.iter().all(settled) => failure.clone(),
            Some(_) => return,
            None if all_done => "all deliveries made".to_string(),
            None => return,
        };
        let success = task_succeeded(&self.log, &expectation);
        let led = match &expectation {
            TaskExpectation::Sequential {
                task,
                initiator,
                peer,
                zone,
            } => Some(sequential_led(&self.log, *task, *initiator, *peer, *zone)),
            _ => None,
        };
        self.log.push(LogRecord::TaskEnd {
            task: expectation.task(),
            success,
            led,
            reason,
            sim_time: self.now,
        });
        if self.collect_frames {
            if let Ok(report) = MetricsReport::from_log(&self.log) {
                self.outbox.push(OutputFrame::Metrics(Box::new(report)));
            }
        }
        self.advance_task();
    }

    fn operator_view(&self) -> OperatorView {
        OperatorView {
            // any command releases a stuck robot, so it counts as ready
            quiescent: self
                .robots
                .values()
                .filter(|r| (r.is_quiescent() || r.phase == Phase::Stuck) && self.pending_drive != Some(r.id))
                .map(|r| r.id)
                .collect(),
            delivered: self.task_delivered.clone(),
            known_weather: self.known_weather,
        }
    }

    fn operator_decide(&mut self) {
        if self.operator_busy || self.end.is_some() || self.task_index.is_none() {
            return;
        }
        let view = self.operator_view();
        let Some(action) = self.operator.as_mut().and_then(|op| op.next_action(&view)) else {
            self.start_puzzle();
            return;
        };
        // any operator action interrupts the puzzle
        self.puzzle_generation += 1;
        self.puzzle_running = false;
        self.operator_busy = true;
        let model = self.scenario.file.operator_model;
        let assistant_ms = self.scenario.file.latencies.assistant_ms;
        match action {
            OperatorAction::Speak { text, robot } => {
                self.interaction(InteractionKind::CommandStart, robot);
                let spoken = Utterance {
                    speaker: OPERATOR_ID.into(),
                    listener: ASSISTANT_ID.into(),
                    text: text.clone(),
                    spoken_at: self.now,
                    heard_at: self.now + model.utterance_ms,
                };
                self.log_utterance(&spoken);
                self.schedule(
                    spoken.heard_at + assistant_ms,
                    Event::AssistantText {
                        speaker: Speaker::Operator,
                        text,
                        robot,
                        command: true,
                    },
                );
            }
            OperatorAction::AskWeather { robot } => {
                self.interaction(InteractionKind::UtteranceStart, Some(robot));
                let end = self.now + model.utterance_ms;
                self.schedule(end, Event::UtteranceEnd { robot });
                self.schedule(
                    end + assistant_ms,
                    Event::AssistantText {
                        speaker: Speaker::Operator,
                        text: OPERATOR_WEATHER_QUESTION.into(),
                        robot: Some(robot),
                        command: false,
                    },
                );
            }
            OperatorAction::Drive { robot, zone } => {
                self.interaction(InteractionKind::CommandStart, Some(robot));
                self.pending_drive = Some(robot);
                self.schedule(self.now + model.keyboard_setup_ms, Event::Teleop { robot, zone });
            }
        }
    }

    fn start_puzzle(&mut self) {
        if self.puzzle_running {
            return;
        }
        if let Some(interval) = self.puzzle_interval_ms() {
            self.puzzle_running = true;
            self.puzzle_generation += 1;
            let generation = self.puzzle_generation;
            self.schedule(self.now + interval, Event::PuzzlePiece { generation });
        }
    }

    fn puzzle_interval_ms(&self) -> Option<u64> {
        self.scenario
            .file
            .operator_model
            .puzzle_piece_interval_s
            .map(|s| (s * 1000.0).round().max(1.0) as u64)
    }

    fn on_puzzle_piece(&mut self, generation: u64) {
        if generation != self.puzzle_generation || !self.puzzle_running || self.operator_busy {
            return;
        }
        self.interaction(InteractionKind::PuzzlePiecePlaced, None);
        self.puzzle_running = false;
        self.start_puzzle();
    }

    fn finish(&mut self, complete: bool, reason: &str) {
        if self.end.is_some() {
            return;
        }
        self.log.push(LogRecord::RunEnd {
            complete,
            reason: reason.to_string(),
            sim_time: self.now,
        });
        self.end = Some(RunEnd {
            complete,
            reason: reason.to_string(),
            sim_time: self.now,
        });
        if self.collect_frames {
            if let Ok(report) = MetricsReport::from_log(&self.log) {
                self.outbox.push(OutputFrame::Metrics(Box::new(report)));
            }
        }
    }
}
