//! Virtual-assistant engine: skill interpretation, the intent handler that
//! publishes robot commands and reads back shadows, and the weather skill.

mod skill;
mod weather;

pub use skill::{
    tokenize, ActionSpec, Intent, IntentSpec, SkillModel, SlotType, BUNDLED_SKILL_MODEL,
    CONFIDENCE_THRESHOLD,
};
pub use weather::{Weather, WeatherSkill};

use crate::broker::{Broker, BrokerError, Receipt};
use crate::robots::thing_id;
use crate::shadow::{ShadowDocument, ShadowError, ShadowStore, StatePatch};
use crate::value::{Scalar, StateMap};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const WEATHER_QUERY: &str = "WeatherQuery";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssistantError {
    #[error("no intent matched `{0}`")]
    NoIntentMatched(String),
    #[error("ambiguous utterance; candidates {tied:?}")]
    AmbiguousIntent { chosen: Box<Intent>, tied: Vec<String> },
    #[error("invalid skill model: {0}")]
    InvalidSkillModel(String),
    #[error("intent `{0}` is not valid for this skill model")]
    InvalidIntent(String),
    #[error("robot {robot} unreachable: {reason}")]
    RobotUnreachable { robot: u32, reason: String },
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error(transparent)]
    Shadow(#[from] ShadowError),
}

impl AssistantError {
    pub fn code(&self) -> &'static str {
        match self {
            AssistantError::NoIntentMatched(_) => "NoIntentMatched",
            AssistantError::AmbiguousIntent { .. } => "AmbiguousIntent",
            AssistantError::InvalidSkillModel(_) => "InvalidSkillModel",
            AssistantError::InvalidIntent(_) => "InvalidIntent",
            AssistantError::RobotUnreachable { .. } => "RobotUnreachable",
            AssistantError::Broker(_) => "BrokerError",
            AssistantError::Shadow(_) => "ShadowError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechResponse {
    pub text: String,
    pub includes_state_report: bool,
}

/// How command payloads reach robots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandRoute {
    /// Publish on the broker (robots subscribe).
    #[default]
    Broker,
    /// Write the command into each addressed robot's desired state (robots poll).
    ShadowDesired,
}

/// Mutable services the handler acts on.
pub struct Services<'a> {
    pub broker: &'a mut Broker,
    pub shadows: &'a mut ShadowStore,
    pub now: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Handled {
    pub response: SpeechResponse,
    pub receipt: Option<Receipt>,
    pub desired_writes: Vec<ShadowDocument>,
    pub shadow_reads: Vec<ShadowDocument>,
    pub weather: Option<Weather>,
}

#[derive(Debug, Clone)]
pub struct Assistant {
    model: SkillModel,
    topic_overrides: BTreeMap<String, String>,
    robots: Vec<u32>,
    route: CommandRoute,
    staleness_ms: Option<u64>,
    weather: WeatherSkill,
    phase: String,
    commands_sent: u64,
}

impl Assistant {
    pub fn new(model: SkillModel, robots: Vec<u32>, weather: WeatherSkill) -> Self {
        Assistant {
            model,
            topic_overrides: BTreeMap::new(),
            robots,
            route: CommandRoute::Broker,
            staleness_ms: None,
            weather,
            phase: String::new(),
            commands_sent: 0,
        }
    }

    pub fn with_topic_overrides(mut self, overrides: BTreeMap<String, String>) -> Self {
        self.topic_overrides = overrides;
        self
    }

    pub fn with_route(mut self, route: CommandRoute) -> Self {
        self.route = route;
        self
    }

    pub fn with_staleness(mut self, staleness_ms: Option<u64>) -> Self {
        self.staleness_ms = staleness_ms;
        self
    }

    pub fn model(&self) -> &SkillModel {
        &self.model
    }

    /// Starts a new weather phase; the next weather query draws afresh.
    pub fn set_phase(&mut self, phase: &str) {
        self.phase = phase.to_string();
    }

    pub fn weather_skill(&self) -> &WeatherSkill {
        &self.weather
    }

    pub fn interpret(&self, utterance: &str) -> Result<Intent, AssistantError> {
        self.model.interpret(utterance)
    }

    /// Robots an intent addresses: the `robot` slot if present, every robot
    /// for slotless commands, none for speech-only intents.
    pub fn addressed_robots(&self, intent: &Intent) -> Vec<u32> {
        match (intent.robot(), self.command_of(intent)) {
            (Some(r), _) => vec![r],
            (None, Some(_)) => self.robots.clone(),
            (None, None) => Vec::new(),
        }
    }

    fn command_of(&self, intent: &Intent) -> Option<&str> {
        self.model
            .intent(&intent.name)
            .and_then(|spec| spec.action.command.as_deref())
    }

    fn topic_for(&self, intent: &Intent) -> Option<String> {
        let spec = self.model.intent(&intent.name)?;
        let template = self
            .topic_overrides
            .get(&intent.name)
            .or(spec.action.topic.as_ref())?;
        let mut topic = template.clone();
        for (name, value) in &intent.slots {
            topic = topic.replace(&format!("{{{name}}}"), &value.to_string());
        }
        Some(topic)
    }

    fn validate(&self, intent: &Intent) -> Result<&IntentSpec, AssistantError> {
        let spec = self
            .model
            .intent(&intent.name)
            .ok_or_else(|| AssistantError::InvalidIntent(intent.name.clone()))?;
        if spec.slots.keys().any(|k| !intent.slots.contains_key(k)) {
            return Err(AssistantError::InvalidIntent(intent.name.clone()));
        }
        Ok(spec)
    }

    fn check_reachable(&self, robot: u32, services: &Services<'_>) -> Result<(), AssistantError> {
        let thing = thing_id(robot);
        let doc = services
            .shadows
            .peek(&thing)
            .ok_or_else(|| AssistantError::RobotUnreachable {
                robot,
                reason: "no shadow".into(),
            })?;
        if let Some(limit) = self.staleness_ms {
            let age = services.now.saturating_sub(doc.last_updated);
            if age > limit {
                return Err(AssistantError::RobotUnreachable {
                    robot,
                    reason: format!("shadow stale for {age} ms"),
                });
            }
        }
        Ok(())
    }

    /// Handles one interpreted intent: at most one command dispatch, then one
    /// shadow read per addressed robot, then the spoken response.
    pub fn handle_intent(
        &mut self,
        intent: &Intent,
        services: &mut Services<'_>,
    ) -> Result<Handled, AssistantError> {
        let spec = self.validate(intent)?.clone();
        let addressed = self.addressed_robots(intent);
        for robot in &addressed {
            self.check_reachable(*robot, services)?;
        }

        let mut receipt = None;
        let mut desired_writes = Vec::new();
        if let Some(command) = spec.action.command.as_deref() {
            self.commands_sent += 1;
            let mut payload: StateMap = intent.slots.clone();
            payload.insert("kind".into(), Scalar::from(command));
            payload.insert("cmd_id".into(), Scalar::Int(self.commands_sent as i64));
            match self.route {
                CommandRoute::Broker => {
                    if let Some(topic) = self.topic_for(intent) {
                        services.broker.set_time(services.now)?;
                        receipt = Some(services.broker.publish("alexa", &topic, payload)?);
                    }
                }
                CommandRoute::ShadowDesired => {
                    services.shadows.set_time(services.now);
                    for robot in &addressed {
                        let thing = thing_id(*robot);
                        // clear keys left over from the previous command
                        let stale: BTreeSet<String> = services
                            .shadows
                            .peek(&thing)
                            .map(|doc| {
                                doc.desired
                                    .keys()
                                    .filter(|k| !payload.contains_key(*k))
                                    .cloned()
                                    .collect()
                            })
                            .unwrap_or_default();
                        let patch = StatePatch::new(payload.clone(), stale)?;
                        desired_writes.push(services.shadows.update_desired(&thing, &patch)?);
                    }
                }
            }
        }

        let shadow_reads = addressed
            .iter()
            .map(|r| services.shadows.get_shadow(&thing_id(*r)))
            .collect::<Result<Vec<_>, _>>()?;

        let weather = (intent.name == WEATHER_QUERY).then(|| self.weather.query(&self.phase));
        let response = compose_response(intent, &spec, &shadow_reads, weather);
        Ok(Handled {
            response,
            receipt,
            desired_writes,
            shadow_reads,
            weather,
        })
    }
}

fn compose_response(
    intent: &Intent,
    spec: &IntentSpec,
    reads: &[ShadowDocument],
    weather: Option<Weather>,
) -> SpeechResponse {
    let mut text = match (intent.name.as_str(), weather) {
        (_, Some(w)) => format!("The weather today is {w}."),
        ("Navigate", _) => format!(
            "Okay, sending placebot {} to {}.",
            slot_text(intent, "robot"),
            zone_text(intent)
        ),
        ("WeatherNavigate", _) => format!(
            "Okay, placebot {} will deliver based on the weather.",
            slot_text(intent, "robot")
        ),
        ("SequentialDelivery", _) => "Okay, starting sequential delivery.".to_string(),
        ("Stop", _) => format!("Stopping placebot {}.", slot_text(intent, "robot")),
        (name, _) => format!("Okay, {name}."),
    };
    let report = spec.action.report_state && !reads.is_empty();
    if report {
        for doc in reads {
            let status = doc
                .reported
                .get("status")
                .map(|s| s.to_string())
                .unwrap_or_else(|| "unknown".into());
            text.push_str(&format!(" {} reports {status}.", doc.thing_id));
        }
    }
    SpeechResponse {
        text,
        includes_state_report: report,
    }
}

fn slot_text(intent: &Intent, slot: &str) -> String {
    intent
        .slots
        .get(slot)
        .map(|v| v.to_string())
        .unwrap_or_default()
}

fn zone_text(intent: &Intent) -> String {
    match intent.slots.get("zone").and_then(Scalar::as_str) {
        Some("Loading") => "the loading zone".into(),
        Some(z) => format!("zone {z}"),
        None => "its zone".into(),
    }
}
