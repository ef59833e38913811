//! Simulated speech channel between robots and the assistant.
//!
//! Speech is plain text with a fixed latency. Recognition may drop one word
//! (probability `p_mishear`), and the robot-side keyword interpreter turns the
//! heard reply into a weather intent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VoiceError {
    #[error("cannot speak an empty utterance")]
    EmptyUtterance,
    #[error("no listener within audio range of `{0}`")]
    NoListener(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub listener: String,
    pub text: String,
    pub spoken_at: u64,
    pub heard_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RobotIntentName {
    SunnyWeather,
    RainyWeather,
    Unrecognized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotIntent {
    pub name: RobotIntentName,
    pub source_text: String,
}

/// Keyword rules, checked in order; the first hit wins.
const KEYWORD_RULES: &[(&str, RobotIntentName)] = &[
    ("sunny", RobotIntentName::SunnyWeather),
    ("rain", RobotIntentName::RainyWeather),
];

pub fn lex_interpret(text: &str) -> RobotIntent {
    let lower = text.to_lowercase();
    let name = KEYWORD_RULES
        .iter()
        .find(|(kw, _)| lower.contains(kw))
        .map(|(_, name)| *name)
        .unwrap_or(RobotIntentName::Unrecognized);
    RobotIntent {
        name,
        source_text: text.to_string(),
    }
}

/// Returns `text` verbatim, or with one uniformly chosen word deleted with
/// probability `p_mishear`. Always consumes two draws so that runs with
/// different `p_mishear` stay coupled on the same seed.
pub fn recognize<R: Rng>(text: &str, p_mishear: f64, rng: &mut R) -> String {
    let roll: f64 = rng.gen();
    let pick: f64 = rng.gen();
    if roll >= p_mishear {
        return text.to_string();
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return String::new();
    }
    let drop = ((pick * words.len() as f64) as usize).min(words.len() - 1);
    words
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != drop)
        .map(|(_, w)| *w)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Audio scope and timing. Agents registered with [`VoiceLink::colocate`] are
/// heard by the hub; the hub is heard by whoever addressed it last.
#[derive(Debug, Clone)]
pub struct VoiceLink {
    latency_ms: u64,
    p_mishear: f64,
    rng: ChaCha8Rng,
    hub_of: BTreeMap<String, String>,
    last_caller: BTreeMap<String, String>,
}

impl VoiceLink {
    pub fn new(latency_ms: u64, p_mishear: f64, rng: ChaCha8Rng) -> Self {
        VoiceLink {
            latency_ms,
            p_mishear: p_mishear.clamp(0.0, 1.0),
            rng,
            hub_of: BTreeMap::new(),
            last_caller: BTreeMap::new(),
        }
    }

    pub fn latency_ms(&self) -> u64 {
        self.latency_ms
    }

    pub fn colocate(&mut self, agent: &str, hub: &str) {
        self.hub_of.insert(agent.to_string(), hub.to_string());
    }

    pub fn say(&mut self, speaker: &str, text: &str, now: u64) -> Result<Utterance, VoiceError> {
        if text.trim().is_empty() {
            return Err(VoiceError::EmptyUtterance);
        }
        let listener = if let Some(hub) = self.hub_of.get(speaker) {
            self.last_caller.insert(hub.clone(), speaker.to_string());
            hub.clone()
        } else {
            self.last_caller
                .get(speaker)
                .cloned()
                .ok_or_else(|| VoiceError::NoListener(speaker.to_string()))?
        };
        Ok(Utterance {
            speaker: speaker.to_string(),
            listener,
            text: text.to_string(),
            spoken_at: now,
            heard_at: now + self.latency_ms,
        })
    }

    /// Speaks directly to `listener`, bypassing last-caller routing.
    pub fn reply(&mut self, speaker: &str, listener: &str, text: &str, now: u64) -> Result<Utterance, VoiceError> {
        if text.trim().is_empty() {
            return Err(VoiceError::EmptyUtterance);
        }
        Ok(Utterance {
            speaker: speaker.to_string(),
            listener: listener.to_string(),
            text: text.to_string(),
            spoken_at: now,
            heard_at: now + self.latency_ms,
        })
    }

    pub fn recognize(&mut self, utterance: &Utterance) -> String {
        recognize(&utterance.text, self.p_mishear, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn link(latency: u64, p: f64) -> VoiceLink {
        let mut link = VoiceLink::new(latency, p, ChaCha8Rng::seed_from_u64(9));
        link.colocate("placebot1", "alexa");
        link
    }

    #[test]
    fn robot_question_reaches_alexa_and_reply_returns() {
        let mut link = link(1500, 0.0);
        let q = link.say("placebot1", "Alexa, what is the weather today?", 100).unwrap();
        assert_eq!(q.listener, "alexa");
        assert_eq!(q.heard_at, 1600);
        let a = link.say("alexa", "The weather today is sunny.", 2000).unwrap();
        assert_eq!(a.listener, "placebot1");
    }

    #[test]
    fn zero_latency_is_instant_and_empty_rejected() {
        let mut link = link(0, 0.0);
        let u = link.say("placebot1", "hi", 42).unwrap();
        assert_eq!(u.heard_at, u.spoken_at);
        assert_eq!(link.say("placebot1", "  ", 0), Err(VoiceError::EmptyUtterance));
    }

    #[test]
    fn hub_without_caller_has_no_listener() {
        let mut link = link(0, 0.0);
        assert!(matches!(link.say("alexa", "hello", 0), Err(VoiceError::NoListener(_))));
        assert!(matches!(link.say("stranger", "hello", 0), Err(VoiceError::NoListener(_))));
    }

    #[test]
    fn recognition_identity_at_zero_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(recognize("it is sunny today", 0.0, &mut rng), "it is sunny today");
        }
    }

    #[test]
    fn full_noise_drops_one_word_deterministically() {
        let a = recognize("it is sunny today", 1.0, &mut ChaCha8Rng::seed_from_u64(5));
        let b = recognize("it is sunny today", 1.0, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert_eq!(a.split_whitespace().count(), 3);
    }

    #[test]
    fn corruption_rate_tracks_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let text = "the weather today is sunny";
        let corrupted = (0..10_000)
            .filter(|_| recognize(text, 0.1, &mut rng) != text)
            .count();
        let rate = corrupted as f64 / 10_000.0;
        assert!((0.08..=0.12).contains(&rate), "rate {rate}");
    }

    #[test]
    fn keyword_rules() {
        assert_eq!(lex_interpret("the weather today is sunny").name, RobotIntentName::SunnyWeather);
        assert_eq!(lex_interpret("expect rain this afternoon").name, RobotIntentName::RainyWeather);
        assert_eq!(lex_interpret("The weather today is RAINY").name, RobotIntentName::RainyWeather);
        assert_eq!(lex_interpret("hello").name, RobotIntentName::Unrecognized);
        // first rule wins
        assert_eq!(lex_interpret("sunny with rain").name, RobotIntentName::SunnyWeather);
    }
}
