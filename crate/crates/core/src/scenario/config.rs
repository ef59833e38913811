//! Scenario files: parsing, defaults and validation.

use crate::assistant::{SkillModel, BUNDLED_SKILL_MODEL};
use crate::metrics::{level_percent, TaskId, TlxResponse, TrustLevel};
use crate::robots::{Cell, WorldConfig, ZoneName};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::ScenarioError;

/// Bundled three-task scenario with two robots.
pub const BUNDLED_TASKS_FULL: &str = include_str!("../../scenarios/tasks_full.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub id: u32,
    pub start: Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Latencies {
    pub broker_ms: u64,
    pub shadow_ms: u64,
    pub assistant_ms: u64,
    pub speech_ms: u64,
}

impl Default for Latencies {
    fn default() -> Self {
        Latencies {
            broker_ms: 10,
            shadow_ms: 10,
            assistant_ms: 300,
            speech_ms: 1500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorMode {
    #[default]
    ScriptedVahr,
    ScriptedKeyboard,
    Live,
}

impl OperatorMode {
    /// Method label recorded in logs and reports.
    pub fn method(self) -> &'static str {
        match self {
            OperatorMode::ScriptedVahr => "vahr",
            OperatorMode::ScriptedKeyboard => "keyboard",
            OperatorMode::Live => "live",
        }
    }
}

impl fmt::Display for OperatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorMode::ScriptedVahr => "scripted-vahr",
            OperatorMode::ScriptedKeyboard => "scripted-keyboard",
            OperatorMode::Live => "live",
        })
    }
}

impl FromStr for OperatorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "scripted-vahr" | "vahr" => Ok(OperatorMode::ScriptedVahr),
            "scripted-keyboard" | "keyboard" => Ok(OperatorMode::ScriptedKeyboard),
            "live" => Ok(OperatorMode::Live),
            other => Err(format!("unknown operator `{other}`")),
        }
    }
}

/// Timing model for scripted operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorModel {
    /// Time to speak one command.
    pub utterance_ms: u64,
    /// Keyboard operator's time to select a robot and start driving.
    pub keyboard_setup_ms: u64,
    /// Uninterrupted free time per puzzle piece; `null` disables the puzzle.
    pub puzzle_piece_interval_s: Option<f64>,
}

impl Default for OperatorModel {
    fn default() -> Self {
        OperatorModel {
            utterance_ms: 2500,
            keyboard_setup_ms: 2000,
            puzzle_piece_interval_s: Some(12.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    /// Commands are published; robots receive them by subscription.
    #[default]
    Mqtt,
    /// Commands are written to desired state; robots poll their shadow.
    ShadowPoll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandTransport {
    pub mode: TransportMode,
    pub interval_ms: u64,
}

impl Default for CommandTransport {
    fn default() -> Self {
        CommandTransport {
            mode: TransportMode::Mqtt,
            interval_ms: 500,
        }
    }
}

/// Injected failures for exercising the failure paths.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Faults {
    /// Scripted operator sends this robot to a wrong zone in Task I.
    pub task1_wrong_zone_robot: Option<u32>,
    /// Peer acts first in Task III.
    pub task3_reverse_order: bool,
    /// Initiator delivers here instead of Zone D in Task III.
    pub task3_initiator_zone: Option<ZoneName>,
    /// Initiator never sends the go-signal in Task III.
    pub drop_coordination_signal: bool,
}

fn default_tasks() -> Vec<TaskId> {
    vec![TaskId::I, TaskId::II, TaskId::III]
}

fn default_timeout_s() -> u64 {
    1800
}

fn default_tick_ms() -> u64 {
    100
}

fn default_coordination_timeout_s() -> u64 {
    120
}

fn default_max_weather_retries() -> u32 {
    2
}

/// Scenario as written on disk. Every field except `robots` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub world: WorldConfig,
    pub robots: Vec<RobotSpec>,
    /// Path relative to the scenario file; `null` uses the bundled model.
    #[serde(default)]
    pub skill_model: Option<PathBuf>,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<TaskId>,
    #[serde(default)]
    pub latencies: Latencies,
    #[serde(default)]
    pub p_mishear: f64,
    #[serde(default)]
    pub operator: OperatorMode,
    /// Seed for the zone draw; the run seed when absent.
    #[serde(default)]
    pub zone_seed: Option<u64>,
    #[serde(default)]
    pub operator_model: OperatorModel,
    #[serde(default)]
    pub command_transport: CommandTransport,
    /// Per-intent topic template overrides.
    #[serde(default)]
    pub intent_topics: BTreeMap<String, String>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default = "default_tick_ms")]
    pub tick_ms: u64,
    #[serde(default = "default_coordination_timeout_s")]
    pub coordination_timeout_s: u64,
    #[serde(default = "default_max_weather_retries")]
    pub max_weather_retries: u32,
    /// Task III peer drives to the loading zone before the go-signal.
    #[serde(default)]
    pub peer_preposition: bool,
    /// Shadows older than this make a robot unreachable; `null` disables.
    #[serde(default)]
    pub staleness_ms: Option<u64>,
    /// Trust state; derived from `tlx_response` when absent, else Medium.
    #[serde(default)]
    pub trust: Option<TrustLevel>,
    #[serde(default)]
    pub tlx_response: Option<TlxResponse>,
    #[serde(default)]
    pub faults: Faults,
}

/// A validated scenario with its skill model resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub skill_model: SkillModel,
    skill_model_source: String,
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        msg: msg.into(),
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<ScenarioFile, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ScenarioError::Parse {
                field: if field == "." { String::new() } else { field },
                msg: e.into_inner().to_string(),
            }
        })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.world.validate().map_err(|msg| match msg.split_once(": ") {
            Some((field, rest)) => invalid(field, rest),
            None => invalid("world", msg),
        })?;

        let mut ids = BTreeSet::new();
        for (i, robot) in self.robots.iter().enumerate() {
            if robot.id == 0 {
                return Err(invalid(format!("robots[{i}].id"), "ids start at 1"));
            }
            if !ids.insert(robot.id) {
                return Err(invalid(format!("robots[{i}].id"), format!("duplicate id {}", robot.id)));
            }
            if !self.world.contains(robot.start) {
                return Err(invalid(format!("robots[{i}].start"), "outside the grid"));
            }
        }

        if self.tasks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("tasks", "tasks must be distinct and in order I, II, III"));
        }
        if !self.tasks.is_empty() && self.robots.is_empty() {
            return Err(invalid("robots", "tasks need at least one robot"));
        }
        if self.tasks.contains(&TaskId::I) && self.robots.len() > ZoneName::DELIVERY.len() {
            return Err(invalid("robots", "Task I assigns distinct zones; at most 4 robots"));
        }
        if self.tasks.contains(&TaskId::III) && !(ids.contains(&1) && ids.contains(&2)) {
            return Err(invalid("tasks", "Task III needs robots 1 and 2"));
        }

        if !(0.0..=1.0).contains(&self.p_mishear) {
            return Err(invalid("p_mishear", "must be within [0, 1]"));
        }
        if self.tick_ms == 0 {
            return Err(invalid("tick_ms", "must be > 0"));
        }
        if self.timeout_s == 0 {
            return Err(invalid("timeout_s", "must be > 0"));
        }
        if self.command_transport.interval_ms == 0 {
            return Err(invalid("command_transport.interval_ms", "must be > 0"));
        }
        if let Some(interval) = self.operator_model.puzzle_piece_interval_s {
            if !(interval.is_finite() && interval > 0.0) {
                return Err(invalid("operator_model.puzzle_piece_interval_s", "must be > 0 or null"));
            }
        }
        if let Some(robot) = self.faults.task1_wrong_zone_robot {
            if !ids.contains(&robot) {
                return Err(invalid("faults.task1_wrong_zone_robot", format!("no robot {robot}")));
            }
        }
        if self.faults.task3_initiator_zone == Some(ZoneName::Loading) {
            return Err(invalid("faults.task3_initiator_zone", "must be a delivery zone"));
        }
        if let Some(tlx) = &self.tlx_response {
            for (item, level) in tlx.items() {
                level_percent(item, level)
                    .map_err(|e| invalid(format!("tlx_response.{item}"), e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Explicit trust, else the questionnaire's trust item, else Medium.
    pub fn resolved_trust(&self) -> TrustLevel {
        self.trust
            .or_else(|| self.tlx_response.and_then(|t| t.trust_level().ok()))
            .unwrap_or_default()
    }
}

impl Scenario {
    /// Parses and validates scenario JSON; relative paths resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
        let file = ScenarioFile::from_json(text)?;
        Scenario::from_file(file, base_dir)
    }

    pub fn from_file(file: ScenarioFile, base_dir: &Path) -> Result<Scenario, ScenarioError> {
        file.validate()?;
        let skill_model_source = match &file.skill_model {
            None => BUNDLED_SKILL_MODEL.to_string(),
            Some(path) => std::fs::read_to_string(base_dir.join(path))
                .map_err(|e| invalid("skill_model", format!("{}: {e}", path.display())))?,
        };
        let skill_model = SkillModel::from_json(&skill_model_source)
            .map_err(|e| invalid("skill_model", e.to_string()))?;
        Ok(Scenario {
            file,
            skill_model,
            skill_model_source,
        })
    }

    pub fn bundled_full() -> Scenario {
        Scenario::from_json(BUNDLED_TASKS_FULL, Path::new("."))
            .expect("bundled scenario is valid")
    }

    /// Content hash over the resolved scenario and its skill model.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&self.file).expect("scenario serializes"));
        hasher.update(self.skill_model_source.as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn with_operator(mut self, operator: OperatorMode) -> Scenario {
        self.file.operator = operator;
        self
    }

    pub fn robot_ids(&self) -> Vec<u32> {
        self.file.robots.iter().map(|r| r.id).collect()
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Scenario::from_json(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenario_has_three_tasks_two_robots() {
        let s = Scenario::bundled_full();
        assert_eq!(s.file.tasks, vec![TaskId::I, TaskId::II, TaskId::III]);
        assert_eq!(s.robot_ids(), vec![1, 2]);
    }

    #[test]
    fn defaults_fill_omitted_sections() {
        let s = Scenario::from_json(r#"{"robots":[{"id":1,"start":[3,3]}],"tasks":[]}"#, Path::new("."))
            .unwrap();
        assert_eq!(s.file.latencies, Latencies::default());
        assert_eq!(s.file.latencies.broker_ms, 10);
        assert_eq!(s.file.timeout_s, 1800);
        assert_eq!(s.file.operator, OperatorMode::ScriptedVahr);
        assert_eq!(s.file.command_transport.mode, TransportMode::Mqtt);
        assert_eq!(s.file.resolved_trust(), TrustLevel::Medium);
    }

    #[test]
    fn unknown_zone_names_the_field() {
        let text = r#"{"robots":[{"id":1,"start":[3,3]}],"world":{"zones":{"E":[1,1]}}}"#;
        match ScenarioFile::from_json(text) {
            Err(ScenarioError::Parse { field, .. }) => assert!(field.starts_with("world.zones"), "{field}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"robots":[],"tasks":[],"colour":"red"}"#;
        assert!(matches!(ScenarioFile::from_json(text), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn validation_names_field() {
        let text = r#"{"robots":[{"id":1,"start":[30,3]}],"tasks":[]}"#;
        match Scenario::from_json(text, Path::new(".")) {
            Err(ScenarioError::Validation { field, .. }) => assert_eq!(field, "robots[0].start"),
            other => panic!("{other:?}"),
        }
        let text = r#"{"robots":[{"id":1,"start":[3,3]}],"p_mishear":1.5,"tasks":[]}"#;
        assert!(matches!(
            Scenario::from_json(text, Path::new(".")),
            Err(ScenarioError::Validation { field, .. }) if field == "p_mishear"
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = Scenario::bundled_full();
        let mut b = Scenario::bundled_full();
        assert_eq!(a.hash(), b.hash());
        b.file.p_mishear = 0.1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn operator_names_parse() {
        assert_eq!("scripted-keyboard".parse::<OperatorMode>().unwrap(), OperatorMode::ScriptedKeyboard);
        assert_eq!("scripted_vahr".parse::<OperatorMode>().unwrap(), OperatorMode::ScriptedVahr);
        assert!("mouse".parse::<OperatorMode>().is_err());
    }
}
