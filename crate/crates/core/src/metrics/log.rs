//! Event-log records. One JSON object per line, discriminated by `kind`.

use crate::assistant::{Intent, Weather};
use crate::robots::ZoneName;
use crate::shadow::ShadowDocument;
use crate::value::StateMap;
use crate::voice_link::RobotIntentName;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use super::{MetricsError, TlxResponse, TrustLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InteractionKind {
    CommandStart,
    CommandAck,
    RobotAutonomousStart,
    RobotIdle,
    RobotStuck,
    PuzzlePiecePlaced,
    UtteranceStart,
    UtteranceEnd,
}

/// Operator/robot lifecycle event; the raw material for IE/NT segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub kind: InteractionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot_id: Option<u32>,
    pub sim_time: u64,
}

impl InteractionEvent {
    pub fn new(kind: InteractionKind, robot_id: Option<u32>, sim_time: u64) -> Self {
        InteractionEvent {
            kind,
            robot_id,
            sim_time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskId {
    I,
    II,
    III,
}

impl TaskId {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::I => "I",
            TaskId::II => "II",
            TaskId::III => "III",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What counts as success for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TaskExpectation {
    /// Each robot delivers to its assigned zone.
    Zones {
        task: TaskId,
        #[serde(with = "crate::value::robot_keys")]
        zones: BTreeMap<u32, ZoneName>,
    },
    /// Each robot delivers to the zone the task's weather maps to.
    Weather { task: TaskId, robots: Vec<u32> },
    /// Initiator then peer deliver to `zone`, initiator unloading first.
    Sequential {
        task: TaskId,
        initiator: u32,
        peer: u32,
        zone: ZoneName,
    },
}

impl TaskExpectation {
    pub fn task(&self) -> TaskId {
        match self {
            TaskExpectation::Zones { task, .. }
            | TaskExpectation::Weather { task, .. }
            | TaskExpectation::Sequential { task, .. } => *task,
        }
    }

    pub fn robots(&self) -> Vec<u32> {
        match self {
            TaskExpectation::Zones { zones, .. } => zones.keys().copied().collect(),
            TaskExpectation::Weather { robots, .. } => robots.clone(),
            TaskExpectation::Sequential { initiator, peer, .. } => vec![*initiator, *peer],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub scenario_hash: String,
    pub seed: u64,
    pub method: String,
    pub robots: Vec<u32>,
    pub tasks: Vec<TaskExpectation>,
    pub trust: TrustLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tlx: Option<TlxResponse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct At {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot_id: Option<u32>,
    pub sim_time: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LogRecord {
    #[serde(rename = "run_start")]
    RunStart(RunHeader),
    CommandStart(At),
    CommandAck(At),
    RobotAutonomousStart(At),
    RobotIdle(At),
    RobotStuck(At),
    PuzzlePiecePlaced(At),
    UtteranceStart(At),
    UtteranceEnd(At),
    #[serde(rename = "utterance")]
    Utterance {
        speaker: String,
        listener: String,
        text: String,
        spoken_at: u64,
        heard_at: u64,
    },
    #[serde(rename = "intent")]
    Intent {
        source: String,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intent: Option<Intent>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
        sim_time: u64,
    },
    #[serde(rename = "speech")]
    Speech {
        from: String,
        text: String,
        sim_time: u64,
    },
    #[serde(rename = "publish")]
    Publish {
        publisher: String,
        topic: String,
        seq: u64,
        delivery_count: usize,
        payload: StateMap,
        sim_time: u64,
    },
    #[serde(rename = "shadow")]
    Shadow {
        document: ShadowDocument,
        sim_time: u64,
    },
    #[serde(rename = "load_start")]
    LoadStart {
        robot_id: u32,
        task: Option<TaskId>,
        sim_time: u64,
    },
    #[serde(rename = "delivery")]
    Delivery {
        robot_id: u32,
        zone: ZoneName,
        package: u32,
        task: Option<TaskId>,
        sim_time: u64,
    },
    #[serde(rename = "exchange")]
    Exchange {
        robot_id: u32,
        heard: String,
        recognized: RobotIntentName,
        sim_time: u64,
    },
    #[serde(rename = "weather")]
    Weather {
        phase: String,
        value: Weather,
        sim_time: u64,
    },
    #[serde(rename = "brief")]
    Brief {
        #[serde(with = "crate::value::robot_keys")]
        assignments: BTreeMap<u32, ZoneName>,
        sim_time: u64,
    },
    #[serde(rename = "task_start")]
    TaskStart { task: TaskId, sim_time: u64 },
    #[serde(rename = "task_end")]
    TaskEnd {
        task: TaskId,
        success: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        led: Option<bool>,
        reason: String,
        sim_time: u64,
    },
    #[serde(rename = "error")]
    Error {
        code: String,
        msg: String,
        sim_time: u64,
    },
    #[serde(rename = "input")]
    Input {
        frame: serde_json::Value,
        sim_time: u64,
    },
    #[serde(rename = "run_end")]
    RunEnd {
        complete: bool,
        reason: String,
        sim_time: u64,
    },
}

impl LogRecord {
    pub fn interaction(kind: InteractionKind, robot_id: Option<u32>, sim_time: u64) -> Self {
        let at = At { robot_id, sim_time };
        match kind {
            InteractionKind::CommandStart => LogRecord::CommandStart(at),
            InteractionKind::CommandAck => LogRecord::CommandAck(at),
            InteractionKind::RobotAutonomousStart => LogRecord::RobotAutonomousStart(at),
            InteractionKind::RobotIdle => LogRecord::RobotIdle(at),
            InteractionKind::RobotStuck => LogRecord::RobotStuck(at),
            InteractionKind::PuzzlePiecePlaced => LogRecord::PuzzlePiecePlaced(at),
            InteractionKind::UtteranceStart => LogRecord::UtteranceStart(at),
            InteractionKind::UtteranceEnd => LogRecord::UtteranceEnd(at),
        }
    }

    pub fn as_interaction(&self) -> Option<InteractionEvent> {
        let (kind, at) = match self {
            LogRecord::CommandStart(at) => (InteractionKind::CommandStart, at),
            LogRecord::CommandAck(at) => (InteractionKind::CommandAck, at),
            LogRecord::RobotAutonomousStart(at) => (InteractionKind::RobotAutonomousStart, at),
            LogRecord::RobotIdle(at) => (InteractionKind::RobotIdle, at),
            LogRecord::RobotStuck(at) => (InteractionKind::RobotStuck, at),
            LogRecord::PuzzlePiecePlaced(at) => (InteractionKind::PuzzlePiecePlaced, at),
            LogRecord::UtteranceStart(at) => (InteractionKind::UtteranceStart, at),
            LogRecord::UtteranceEnd(at) => (InteractionKind::UtteranceEnd, at),
            _ => return None,
        };
        Some(InteractionEvent::new(kind, at.robot_id, at.sim_time))
    }

    /// Logical time the record was written at.
    pub fn sim_time(&self) -> u64 {
        match self {
            LogRecord::RunStart(_) => 0,
            LogRecord::CommandStart(at)
            | LogRecord::CommandAck(at)
            | LogRecord::RobotAutonomousStart(at)
            | LogRecord::RobotIdle(at)
            | LogRecord::RobotStuck(at)
            | LogRecord::PuzzlePiecePlaced(at)
            | LogRecord::UtteranceStart(at)
            | LogRecord::UtteranceEnd(at) => at.sim_time,
            LogRecord::Utterance { spoken_at, .. } => *spoken_at,
            LogRecord::Intent { sim_time, .. }
            | LogRecord::Speech { sim_time, .. }
            | LogRecord::Publish { sim_time, .. }
            | LogRecord::Shadow { sim_time, .. }
            | LogRecord::LoadStart { sim_time, .. }
            | LogRecord::Delivery { sim_time, .. }
            | LogRecord::Exchange { sim_time, .. }
            | LogRecord::Weather { sim_time, .. }
            | LogRecord::Brief { sim_time, .. }
            | LogRecord::TaskStart { sim_time, .. }
            | LogRecord::TaskEnd { sim_time, .. }
            | LogRecord::Error { sim_time, .. }
            | LogRecord::Input { sim_time, .. }
            | LogRecord::RunEnd { sim_time, .. } => *sim_time,
        }
    }
}

/// Serializes records as JSON lines.
pub fn write_jsonl<W: Write>(records: &[LogRecord], mut out: W) -> Result<(), MetricsError> {
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(|e| MetricsError::Log(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(records: &[LogRecord]) -> String {
    let mut buf = Vec::new();
    write_jsonl(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Parses JSON lines; blank lines are skipped.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<LogRecord>, MetricsError> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| MetricsError::Log(format!("line {}: {e}", n + 1)))?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interaction_lines_have_flat_shape() {
        let rec = LogRecord::interaction(InteractionKind::CommandStart, Some(1), 250);
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(json, r#"{"kind":"CommandStart","robot_id":1,"sim_time":250}"#);
        let ev: InteractionEvent = serde_json::from_str(&json).unwrap();
        assert_eq!(ev, rec.as_interaction().unwrap());
    }

    #[test]
    fn utterance_line_shape() {
        let rec = LogRecord::Utterance {
            speaker: "placebot1".into(),
            listener: "alexa".into(),
            text: "hi".into(),
            spoken_at: 1,
            heard_at: 2,
        };
        let value = serde_json::to_value(&rec).unwrap();
        assert_eq!(value["kind"], "utterance");
        assert_eq!(value["heard_at"], 2);
    }

    #[test]
    fn jsonl_round_trip() {
        let records = vec![
            LogRecord::interaction(InteractionKind::RobotIdle, Some(2), 9),
            LogRecord::TaskStart {
                task: TaskId::II,
                sim_time: 3,
            },
        ];
        let text = to_jsonl(&records);
        assert_eq!(read_jsonl(text.as_bytes()).unwrap(), records);
        assert!(read_jsonl("{\"kind\":\"nope\"}".as_bytes()).is_err());
    }
}
