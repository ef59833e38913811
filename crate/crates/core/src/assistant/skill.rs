//! Skill models and template-based utterance interpretation.

use crate::value::Scalar;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::AssistantError;

/// Interpretations scoring below this fraction of matched tokens are rejected.
/// JSON source of the skill model shipped with the crate.
pub const BUNDLED_SKILL_MODEL: &str = include_str!("../../scenarios/skill_model.json");

pub const CONFIDENCE_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotType {
    RobotId,
    Zone,
    FreeText,
}

const ROBOT_PHRASES: &[(&str, i64)] = &[
    ("one", 1),
    ("two", 2),
    ("1", 1),
    ("2", 2),
    ("placebot one", 1),
    ("placebot two", 2),
];

const ZONE_PHRASES: &[(&str, &str)] = &[
    ("a", "A"),
    ("b", "B"),
    ("c", "C"),
    ("d", "D"),
    ("loading", "Loading"),
    ("loading zone", "Loading"),
];

impl SlotType {
    /// Resolves a captured token span to a canonical slot value.
    pub fn resolve(self, tokens: &[&str]) -> Option<Scalar> {
        if tokens.is_empty() {
            return None;
        }
        let phrase = tokens.join(" ");
        match self {
            SlotType::RobotId => ROBOT_PHRASES
                .iter()
                .find(|(p, _)| *p == phrase)
                .map(|(_, id)| Scalar::Int(*id)),
            SlotType::Zone => ZONE_PHRASES
                .iter()
                .find(|(p, _)| *p == phrase)
                .map(|(_, z)| Scalar::from(*z)),
            SlotType::FreeText => Some(Scalar::Str(phrase)),
        }
    }

    /// Every phrase the closed grammar accepts; empty for free text.
    pub fn phrases(self) -> Vec<&'static str> {
        match self {
            SlotType::RobotId => ROBOT_PHRASES.iter().map(|(p, _)| *p).collect(),
            SlotType::Zone => ZONE_PHRASES.iter().map(|(p, _)| *p).collect(),
            SlotType::FreeText => Vec::new(),
        }
    }

    fn max_span(self, remaining: usize) -> usize {
        match self {
            SlotType::RobotId | SlotType::Zone => 2.min(remaining),
            SlotType::FreeText => remaining,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    /// Topic template (`{slot}` placeholders allowed); absent for speech-only intents.
    #[serde(default, deserialize_with = "topic_or_none")]
    pub topic: Option<String>,
    /// Command kind placed in the published payload.
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub report_state: bool,
}

fn topic_or_none<'de, D>(de: D) -> Result<Option<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let raw: Option<String> = Option::deserialize(de)?;
    Ok(raw.filter(|t| !t.is_empty() && t != "none"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentSpec {
    pub name: String,
    pub samples: Vec<String>,
    #[serde(default)]
    pub slots: BTreeMap<String, SlotType>,
    pub action: ActionSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Part {
    Word(String),
    Slot(String, SlotType),
}

#[derive(Debug, Clone)]
struct Template {
    intent: usize,
    parts: Vec<Part>,
}

/// A validated set of intents with precompiled templates.
#[derive(Debug, Clone)]
pub struct SkillModel {
    intents: Vec<IntentSpec>,
    templates: Vec<Template>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SkillModelFile {
    intents: Vec<IntentSpec>,
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl SkillModel {
    pub fn new(intents: Vec<IntentSpec>) -> Result<Self, AssistantError> {
        if intents.is_empty() {
            return Err(AssistantError::InvalidSkillModel("no intents".into()));
        }
        let mut templates = Vec::new();
        for (idx, spec) in intents.iter().enumerate() {
            if intents[..idx].iter().any(|o| o.name == spec.name) {
                return Err(AssistantError::InvalidSkillModel(format!(
                    "duplicate intent `{}`",
                    spec.name
                )));
            }
            if spec.samples.is_empty() {
                return Err(AssistantError::InvalidSkillModel(format!(
                    "intent `{}` has no samples",
                    spec.name
                )));
            }
            for sample in &spec.samples {
                templates.push(Template {
                    intent: idx,
                    parts: compile_template(spec, sample)?,
                });
            }
        }
        Ok(SkillModel { intents, templates })
    }

    pub fn from_json(json: &str) -> Result<Self, AssistantError> {
        let file: SkillModelFile = serde_json::from_str(json)
            .map_err(|e| AssistantError::InvalidSkillModel(e.to_string()))?;
        Self::new(file.intents)
    }

    pub fn load(path: &Path) -> Result<Self, AssistantError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            AssistantError::InvalidSkillModel(format!("{}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    /// The skill model shipped with the bundled scenarios.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_SKILL_MODEL)
            .expect("bundled skill model is valid")
    }

    pub fn intents(&self) -> &[IntentSpec] {
        &self.intents
    }

    pub fn intent(&self, name: &str) -> Option<&IntentSpec> {
        self.intents.iter().find(|i| i.name == name)
    }

    /// Picks the best-scoring intent for an utterance.
    pub fn interpret(&self, utterance: &str) -> Result<Intent, AssistantError> {
        let tokens = tokenize(utterance);
        if tokens.is_empty() {
            return Err(AssistantError::NoIntentMatched(utterance.to_string()));
        }
        let words: Vec<&str> = tokens.iter().map(String::as_str).collect();

        // best (matched tokens, slots) per intent index
        let mut best: BTreeMap<usize, (usize, BTreeMap<String, Scalar>)> = BTreeMap::new();
        for template in &self.templates {
            if let Some((matched, slots)) = align(&template.parts, &words) {
                let entry = best.entry(template.intent).or_insert((0, BTreeMap::new()));
                if matched > entry.0 {
                    *entry = (matched, slots);
                }
            }
        }
        let top = best.values().map(|(m, _)| *m).max().unwrap_or(0);
        let confidence = top as f64 / words.len() as f64;
        if top == 0 || confidence < CONFIDENCE_THRESHOLD {
            return Err(AssistantError::NoIntentMatched(utterance.to_string()));
        }
        let mut tied: Vec<(&str, BTreeMap<String, Scalar>)> = best
            .into_iter()
            .filter(|(_, (m, _))| *m == top)
            .map(|(idx, (_, slots))| (self.intents[idx].name.as_str(), slots))
            .collect();
        tied.sort_by(|a, b| a.0.cmp(b.0));
        let names: Vec<String> = tied.iter().map(|(n, _)| n.to_string()).collect();
        let (name, slots) = tied.swap_remove(0);
        let intent = Intent {
            name: name.to_string(),
            slots,
            confidence,
        };
        if names.len() > 1 {
            return Err(AssistantError::AmbiguousIntent {
                chosen: Box::new(intent),
                tied: names,
            });
        }
        Ok(intent)
    }
}

fn compile_template(spec: &IntentSpec, sample: &str) -> Result<Vec<Part>, AssistantError> {
    let mut parts = Vec::new();
    for raw in sample.split_whitespace() {
        if let Some(name) = raw.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
            let slot_type = spec.slots.get(name).ok_or_else(|| {
                AssistantError::InvalidSkillModel(format!(
                    "intent `{}` sample `{sample}` uses undeclared slot `{name}`",
                    spec.name
                ))
            })?;
            parts.push(Part::Slot(name.to_string(), *slot_type));
        } else {
            parts.extend(tokenize(raw).into_iter().map(Part::Word));
        }
    }
    Ok(parts)
}

type Alignment = Option<(usize, BTreeMap<String, Scalar>)>;

/// Aligns every template part, in order, against the utterance, allowing
/// unmatched utterance tokens between parts. Returns the alignment covering
/// the most utterance tokens.
fn align(parts: &[Part], words: &[&str]) -> Alignment {
    fn go(
        parts: &[Part],
        words: &[&str],
        pi: usize,
        wi: usize,
        memo: &mut HashMap<(usize, usize), Alignment>,
    ) -> Alignment {
        if pi == parts.len() {
            return Some((0, BTreeMap::new()));
        }
        if let Some(hit) = memo.get(&(pi, wi)) {
            return hit.clone();
        }
        let mut best: Alignment = None;
        for start in wi..words.len() {
            let candidates: Vec<(usize, Option<(String, Scalar)>)> = match &parts[pi] {
                Part::Word(w) if words[start] == w => vec![(1, None)],
                Part::Word(_) => Vec::new(),
                Part::Slot(name, ty) => (1..=ty.max_span(words.len() - start))
                    .filter_map(|len| {
                        ty.resolve(&words[start..start + len])
                            .map(|v| (len, Some((name.clone(), v))))
                    })
                    .collect(),
            };
            for (len, capture) in candidates {
                if let Some((rest, mut slots)) = go(parts, words, pi + 1, start + len, memo) {
                    let total = rest + len;
                    if best.as_ref().is_none_or(|(b, _)| total > *b) {
                        if let Some((k, v)) = capture {
                            slots.insert(k, v);
                        }
                        best = Some((total, slots));
                    }
                }
            }
        }
        memo.insert((pi, wi), best.clone());
        best
    }
    go(parts, words, 0, 0, &mut HashMap::new())
}

/// A resolved intent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub name: String,
    pub slots: BTreeMap<String, Scalar>,
    pub confidence: f64,
}

impl Intent {
    pub fn new(name: &str) -> Self {
        Intent {
            name: name.to_string(),
            slots: BTreeMap::new(),
            confidence: 1.0,
        }
    }

    pub fn with_slot(mut self, key: &str, value: impl Into<Scalar>) -> Self {
        self.slots.insert(key.to_string(), value.into());
        self
    }

    pub fn robot(&self) -> Option<u32> {
        self.slots
            .get("robot")
            .and_then(Scalar::as_int)
            .and_then(|r| u32::try_from(r).ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn navigate_with_slots() {
        let model = SkillModel::bundled();
        let intent = model.interpret("send placebot one to zone a").unwrap();
        assert_eq!(intent.name, "Navigate");
        assert_eq!(intent.robot(), Some(1));
        assert_eq!(intent.slots["zone"], Scalar::from("A"));
        assert_eq!(intent.confidence, 1.0);
    }

    #[test]
    fn loading_zone_phrase() {
        let model = SkillModel::bundled();
        let intent = model.interpret("Send placebot one to the loading zone").unwrap();
        assert_eq!(intent.name, "Navigate");
        assert_eq!(intent.slots["zone"], Scalar::from("Loading"));
    }

    #[test]
    fn empty_input_rejected() {
        let model = SkillModel::bundled();
        assert!(matches!(model.interpret(""), Err(AssistantError::NoIntentMatched(_))));
        assert!(matches!(model.interpret("  ,, "), Err(AssistantError::NoIntentMatched(_))));
    }

    #[test]
    fn wake_word_prefix_is_tolerated() {
        let model = SkillModel::bundled();
        let intent = model.interpret("alexa, what is the weather today").unwrap();
        assert_eq!(intent.name, "WeatherQuery");
        assert!((intent.confidence - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn gibberish_rejected() {
        let model = SkillModel::bundled();
        assert!(matches!(
            model.interpret("purple monkey dishwasher"),
            Err(AssistantError::NoIntentMatched(_))
        ));
    }

    #[test]
    fn low_confidence_rejected() {
        let model = SkillModel::bundled();
        // 5 matched of 10 tokens
        assert!(matches!(
            model.interpret("so um well what is the weather today you know"),
            Err(AssistantError::NoIntentMatched(_))
        ));
    }

    #[test]
    fn ambiguous_intents_tie_break_alphabetically() {
        let spec = |name: &str| IntentSpec {
            name: name.into(),
            samples: vec!["hello robot".into()],
            slots: BTreeMap::new(),
            action: ActionSpec {
                topic: None,
                command: None,
                report_state: false,
            },
        };
        let model = SkillModel::new(vec![spec("Zeta"), spec("Alpha")]).unwrap();
        match model.interpret("hello robot") {
            Err(AssistantError::AmbiguousIntent { chosen, tied }) => {
                assert_eq!(chosen.name, "Alpha");
                assert_eq!(tied, vec!["Alpha".to_string(), "Zeta".to_string()]);
            }
            other => panic!("expected ambiguity, got {other:?}"),
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(SkillModel::new(Vec::new()).is_err());
        let bad = r#"{"intents":[{"name":"X","samples":["go {where}"],"slots":{},"action":{}}]}"#;
        assert!(SkillModel::from_json(bad).is_err());
        let dup = r#"{"intents":[{"name":"X","samples":["a"],"action":{}},{"name":"X","samples":["b"],"action":{}}]}"#;
        assert!(SkillModel::from_json(dup).is_err());
        let unknown = r#"{"intents":[],"extra":1}"#;
        assert!(SkillModel::from_json(unknown).is_err());
    }

    #[test]
    fn action_topic_none_is_absent() {
        let json = r#"{"intents":[{"name":"X","samples":["a"],"action":{"topic":"none"}}]}"#;
        let model = SkillModel::from_json(json).unwrap();
        assert_eq!(model.intent("X").unwrap().action.topic, None);
    }
}
