//! Splits an interaction log into interaction-effort and neglect intervals.
//!
//! Three interval channels are tracked per robot (or per `None` for
//! unattributed operator speech):
//! - `CommandStart` → `CommandAck` (effort)
//! - `UtteranceStart` → `UtteranceEnd` (effort)
//! - `RobotAutonomousStart` → first `RobotIdle`/`RobotStuck` (neglect)
//!
//! A start arriving while its channel is already open orphans the earlier
//! start; an end with nothing open is orphaned too. Orphans are reported and
//! contribute nothing.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::log::{InteractionEvent, InteractionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Channel {
    Command,
    Utterance,
    Autonomy,
}

fn classify(kind: InteractionKind) -> Option<(Channel, bool)> {
    use InteractionKind::*;
    match kind {
        CommandStart => Some((Channel::Command, true)),
        CommandAck => Some((Channel::Command, false)),
        UtteranceStart => Some((Channel::Utterance, true)),
        UtteranceEnd => Some((Channel::Utterance, false)),
        RobotAutonomousStart => Some((Channel::Autonomy, true)),
        RobotIdle | RobotStuck => Some((Channel::Autonomy, false)),
        PuzzlePiecePlaced => None,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffortTotals {
    pub ie_ms: u64,
    pub nt_ms: u64,
}

impl EffortTotals {
    pub fn ie_s(&self) -> f64 {
        self.ie_ms as f64 / 1000.0
    }

    pub fn nt_s(&self) -> f64 {
        self.nt_ms as f64 / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnpairedEvent {
    pub kind: InteractionKind,
    pub robot_id: Option<u32>,
    pub sim_time: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub per_robot: BTreeMap<u32, EffortTotals>,
    /// Effort not attributed to any robot.
    pub unattributed: EffortTotals,
    pub aggregate: EffortTotals,
    pub unpaired: Vec<UnpairedEvent>,
}

pub fn segment(log: &[InteractionEvent]) -> Segmentation {
    let mut open: BTreeMap<(Channel, Option<u32>), InteractionEvent> = BTreeMap::new();
    let mut seg = Segmentation::default();

    for event in log {
        let Some((channel, is_start)) = classify(event.kind) else {
            continue;
        };
        let key = (channel, event.robot_id);
        if is_start {
            if let Some(orphan) = open.insert(key, *event) {
                seg.unpaired.push(orphan.into());
            }
            continue;
        }
        let Some(start) = open.remove(&key) else {
            seg.unpaired.push((*event).into());
            continue;
        };
        let span = event.sim_time.saturating_sub(start.sim_time);
        let totals = match event.robot_id {
            Some(r) => seg.per_robot.entry(r).or_default(),
            None => &mut seg.unattributed,
        };
        match channel {
            Channel::Command | Channel::Utterance => totals.ie_ms += span,
            Channel::Autonomy => totals.nt_ms += span,
        }
    }
    seg.unpaired.extend(open.into_values().map(UnpairedEvent::from));
    seg.unpaired.sort_by_key(|u| u.sim_time);

    let mut aggregate = seg.unattributed;
    for totals in seg.per_robot.values() {
        aggregate.ie_ms += totals.ie_ms;
        aggregate.nt_ms += totals.nt_ms;
    }
    seg.aggregate = aggregate;
    seg
}

impl From<InteractionEvent> for UnpairedEvent {
    fn from(e: InteractionEvent) -> Self {
        UnpairedEvent {
            kind: e.kind,
            robot_id: e.robot_id,
            sim_time: e.sim_time,
        }
    }
}
