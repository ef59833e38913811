//! In-process topic publish/subscribe broker.
//!
//! Topics are `/`-separated paths. Filters may use `+` for exactly one level
//! and a trailing `#` for any number of remaining levels (including none, so
//! `a/#` also matches `a`). Published messages become drainable
//! `latency_ms` after their publish time, and each subscriber sees them ordered
//! by `(sim_time, publisher_id, seq)`.

use crate::value::StateMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, MutexGuard};
use thiserror::Error;

const SEPARATOR: char = '/';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BrokerError {
    #[error("invalid topic filter `{0}`")]
    InvalidFilter(String),
    #[error("invalid publish topic `{0}`")]
    InvalidTopic(String),
    #[error("subscriber `{subscriber}` is already subscribed to `{filter}`")]
    DuplicateSubscription { subscriber: String, filter: String },
    #[error("unknown subscriber `{0}`")]
    UnknownSubscriber(String),
    #[error("broker clock cannot move backwards ({now} -> {requested})")]
    ClockRegression { now: u64, requested: u64 },
}

/// A concrete topic path a message is published to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Topic(String);

impl Topic {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.0.split(SEPARATOR)
    }
}

impl FromStr for Topic {
    type Err = BrokerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let valid = !s.is_empty()
            && s.split(SEPARATOR)
                .all(|seg| !seg.is_empty() && !seg.contains(['+', '#']));
        if valid {
            Ok(Topic(s.to_string()))
        } else {
            Err(BrokerError::InvalidTopic(s.to_string()))
        }
    }
}

impl TryFrom<String> for Topic {
    type Error = BrokerError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Topic> for String {
    fn from(t: Topic) -> Self {
        t.0
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum FilterSegment {
    Level(String),
    SingleLevel,
    MultiLevel,
}

/// A subscription pattern over topic paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicFilter {
    raw: String,
    segments: Vec<FilterSegment>,
}

impl TopicFilter {
    pub fn as_str(&self) -> &str {
        &self.raw
    }

    /// True iff `topic` matches this filter.
    pub fn matches(&self, topic: &Topic) -> bool {
        let mut levels = topic.segments();
        for segment in &self.segments {
            match segment {
                FilterSegment::MultiLevel => return true,
                FilterSegment::SingleLevel => {
                    if levels.next().is_none() {
                        return false;
                    }
                }
                FilterSegment::Level(name) => match levels.next() {
                    Some(level) if level == name => {}
                    _ => return false,
                },
            }
        }
        levels.next().is_none()
    }
}

impl FromStr for TopicFilter {
    type Err = BrokerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || BrokerError::InvalidFilter(s.to_string());
        if s.is_empty() {
            return Err(invalid());
        }
        let parts: Vec<&str> = s.split(SEPARATOR).collect();
        let last = parts.len() - 1;
        let mut segments = Vec::with_capacity(parts.len());
        for (i, part) in parts.iter().enumerate() {
            let segment = match *part {
                "" => return Err(invalid()),
                "+" => FilterSegment::SingleLevel,
                "#" if i == last => FilterSegment::MultiLevel,
                p if p.contains(['+', '#']) => return Err(invalid()),
                p => FilterSegment::Level(p.to_string()),
            };
            segments.push(segment);
        }
        Ok(TopicFilter {
            raw: s.to_string(),
            segments,
        })
    }
}

impl fmt::Display for TopicFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// Matches a filter string against a topic string.
pub fn topic_matches(filter: &str, topic: &str) -> Result<bool, BrokerError> {
    let filter: TopicFilter = filter.parse()?;
    let topic: Topic = topic.parse()?;
    Ok(filter.matches(&topic))
}

/// An immutable published message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub topic: Topic,
    pub payload: StateMap,
    pub publisher_id: String,
    pub seq: u64,
    pub sim_time: u64,
}

impl Message {
    fn order_key(&self) -> (u64, &str, u64) {
        (self.sim_time, self.publisher_id.as_str(), self.seq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subscription {
    pub subscriber_id: String,
    pub filter: TopicFilter,
}

/// Result of a publish call.
#[derive(Debug, Clone, PartialEq)]
pub struct Receipt {
    pub delivery_count: usize,
    pub message: Arc<Message>,
}

/// Single-threaded broker core. Wrap in [`SharedBroker`] for concurrent use.
#[derive(Debug)]
pub struct Broker {
    latency_ms: u64,
    now: u64,
    subscriptions: Vec<Subscription>,
    mailboxes: BTreeMap<String, Vec<Arc<Message>>>,
    next_seq: BTreeMap<String, u64>,
    published: u64,
}

impl Broker {
    pub fn new(latency_ms: u64) -> Self {
        Broker {
            latency_ms,
            now: 0,
            subscriptions: Vec::new(),
            mailboxes: BTreeMap::new(),
            next_seq: BTreeMap::new(),
            published: 0,
        }
    }

    pub fn latency_ms(&self) -> u64 {
        self.latency_ms
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn published_count(&self) -> u64 {
        self.published
    }

    /// Advances the broker clock used to stamp publishes and gate drains.
    pub fn set_time(&mut self, now: u64) -> Result<(), BrokerError> {
        if now < self.now {
            return Err(BrokerError::ClockRegression {
                now: self.now,
                requested: now,
            });
        }
        self.now = now;
        Ok(())
    }

    pub fn subscribe(
        &mut self,
        subscriber_id: &str,
        filter: &str,
    ) -> Result<Subscription, BrokerError> {
        let filter: TopicFilter = filter.parse()?;
        if self
            .subscriptions
            .iter()
            .any(|s| s.subscriber_id == subscriber_id && s.filter == filter)
        {
            return Err(BrokerError::DuplicateSubscription {
                subscriber: subscriber_id.to_string(),
                filter: filter.raw,
            });
        }
        let sub = Subscription {
            subscriber_id: subscriber_id.to_string(),
            filter,
        };
        self.subscriptions.push(sub.clone());
        self.mailboxes.entry(subscriber_id.to_string()).or_default();
        Ok(sub)
    }

    pub fn subscriptions(&self) -> &[Subscription] {
        &self.subscriptions
    }

    /// Enqueues the message for every subscriber with at least one matching
    /// filter. A subscriber whose filters overlap still gets a single copy.
    pub fn publish(
        &mut self,
        publisher_id: &str,
        topic: &str,
        payload: StateMap,
    ) -> Result<Receipt, BrokerError> {
        let topic: Topic = topic.parse()?;
        let seq = self.next_seq.entry(publisher_id.to_string()).or_insert(0);
        *seq += 1;
        let message = Arc::new(Message {
            topic,
            payload,
            publisher_id: publisher_id.to_string(),
            seq: *seq,
            sim_time: self.now,
        });
        self.published += 1;

        let mut reached: Vec<&str> = self
            .subscriptions
            .iter()
            .filter(|s| s.filter.matches(&message.topic))
            .map(|s| s.subscriber_id.as_str())
            .collect();
        reached.sort_unstable();
        reached.dedup();
        for subscriber in &reached {
            if let Some(mailbox) = self.mailboxes.get_mut(*subscriber) {
                mailbox.push(Arc::clone(&message));
            }
        }
        Ok(Receipt {
            delivery_count: reached.len(),
            message,
        })
    }

    /// Removes and returns every message that has become visible to the
    /// subscriber at the current clock.
    pub fn drain(&mut self, subscriber_id: &str) -> Result<Vec<Message>, BrokerError> {
        let horizon = self.now;
        let latency = self.latency_ms;
        let mailbox = self
            .mailboxes
            .get_mut(subscriber_id)
            .ok_or_else(|| BrokerError::UnknownSubscriber(subscriber_id.to_string()))?;
        let (mut ready, pending): (Vec<_>, Vec<_>) = mailbox
            .drain(..)
            .partition(|m| m.sim_time + latency <= horizon);
        *mailbox = pending;
        ready.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        Ok(ready.into_iter().map(|m| (*m).clone()).collect())
    }

    /// Earliest time at which a queued message for this subscriber becomes drainable.
    pub fn next_visible_at(&self, subscriber_id: &str) -> Option<u64> {
        self.mailboxes
            .get(subscriber_id)?
            .iter()
            .map(|m| m.sim_time + self.latency_ms)
            .min()
    }
}

/// Thread-safe handle for interactive use.
#[derive(Debug, Clone)]
pub struct SharedBroker(Arc<Mutex<Broker>>);

impl SharedBroker {
    pub fn new(broker: Broker) -> Self {
        SharedBroker(Arc::new(Mutex::new(broker)))
    }

    fn lock(&self) -> MutexGuard<'_, Broker> {
        self.0.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn subscribe(&self, subscriber_id: &str, filter: &str) -> Result<Subscription, BrokerError> {
        self.lock().subscribe(subscriber_id, filter)
    }

    pub fn publish(
        &self,
        publisher_id: &str,
        topic: &str,
        payload: StateMap,
    ) -> Result<Receipt, BrokerError> {
        self.lock().publish(publisher_id, topic, payload)
    }

    pub fn drain(&self, subscriber_id: &str) -> Result<Vec<Message>, BrokerError> {
        self.lock().drain(subscriber_id)
    }

    pub fn set_time(&self, now: u64) -> Result<(), BrokerError> {
        self.lock().set_time(now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_map;

    #[test]
    fn exact_subscription_receives_one_message() {
        let mut broker = Broker::new(0);
        broker.subscribe("placebot1", "vahr/cmd/navigate").unwrap();
        let receipt = broker
            .publish("alexa", "vahr/cmd/navigate", state_map! {"zone" => "A"})
            .unwrap();
        assert_eq!(receipt.delivery_count, 1);
        assert_eq!(broker.drain("placebot1").unwrap().len(), 1);
    }

    #[test]
    fn multi_level_wildcard_broadcasts_to_both_robots() {
        let mut broker = Broker::new(0);
        broker.subscribe("placebot1", "vahr/cmd/#").unwrap();
        broker.subscribe("placebot2", "vahr/cmd/#").unwrap();
        let receipt = broker
            .publish("alexa", "vahr/cmd/weather", StateMap::new())
            .unwrap();
        assert_eq!(receipt.delivery_count, 2);
        assert_eq!(broker.drain("placebot1").unwrap().len(), 1);
        assert_eq!(broker.drain("placebot2").unwrap().len(), 1);
    }

    #[test]
    fn single_level_wildcard_matches_exactly_one_level() {
        let filter: TopicFilter = "vahr/+/cmd".parse().unwrap();
        let hits: Vec<&str> = ["vahr/r1/cmd", "vahr/r1/cmd/x", "vahr/cmd"]
            .into_iter()
            .filter(|t| filter.matches(&t.parse().unwrap()))
            .collect();
        assert_eq!(hits, vec!["vahr/r1/cmd"]);
    }

    #[test]
    fn match_examples() {
        assert!(topic_matches("a/b", "a/b").unwrap());
        assert!(topic_matches("a/#", "a/b/c").unwrap());
        assert!(!topic_matches("a/+", "a/b/c").unwrap());
        assert!(topic_matches("a/#", "a").unwrap());
        assert!(topic_matches("#", "x/y").unwrap());
    }

    #[test]
    fn publish_without_subscribers_is_dropped() {
        let mut broker = Broker::new(0);
        let receipt = broker.publish("alexa", "vahr/cmd/spin", StateMap::new()).unwrap();
        assert_eq!(receipt.delivery_count, 0);
    }

    #[test]
    fn spin_topic_reaches_two_robots() {
        let mut broker = Broker::new(0);
        broker.subscribe("placebot1", "vahr/cmd/spin").unwrap();
        broker.subscribe("placebot2", "vahr/cmd/spin").unwrap();
        let receipt = broker.publish("alexa", "vahr/cmd/spin", StateMap::new()).unwrap();
        assert_eq!(receipt.delivery_count, 2);
    }

    #[test]
    fn malformed_filters_and_topics_are_rejected() {
        for bad in ["", "a//b", "a/#/b", "a/b+", "/a", "a/", "#/a"] {
            assert!(
                matches!(bad.parse::<TopicFilter>(), Err(BrokerError::InvalidFilter(_))),
                "{bad}"
            );
        }
        let mut broker = Broker::new(0);
        for bad in ["", "a/+", "a/#", "a//b"] {
            assert!(matches!(
                broker.publish("p", bad, StateMap::new()),
                Err(BrokerError::InvalidTopic(_))
            ));
        }
    }

    #[test]
    fn duplicate_subscription_rejected() {
        let mut broker = Broker::new(0);
        broker.subscribe("r", "a/#").unwrap();
        assert!(matches!(
            broker.subscribe("r", "a/#"),
            Err(BrokerError::DuplicateSubscription { .. })
        ));
        broker.subscribe("r", "a/+").unwrap();
    }

    #[test]
    fn overlapping_filters_deliver_one_copy() {
        let mut broker = Broker::new(0);
        broker.subscribe("r", "a/#").unwrap();
        broker.subscribe("r", "a/+").unwrap();
        assert_eq!(broker.publish("p", "a/b", StateMap::new()).unwrap().delivery_count, 1);
        assert_eq!(broker.drain("r").unwrap().len(), 1);
    }

    #[test]
    fn drain_unknown_and_fresh_subscriber() {
        let mut broker = Broker::new(0);
        assert!(matches!(broker.drain("ghost"), Err(BrokerError::UnknownSubscriber(_))));
        broker.subscribe("r", "a").unwrap();
        assert!(broker.drain("r").unwrap().is_empty());
    }

    #[test]
    fn messages_respect_latency() {
        let mut broker = Broker::new(10);
        broker.subscribe("r", "a").unwrap();
        broker.set_time(100).unwrap();
        broker.publish("p", "a", StateMap::new()).unwrap();
        assert_eq!(broker.next_visible_at("r"), Some(110));
        broker.set_time(109).unwrap();
        assert!(broker.drain("r").unwrap().is_empty());
        broker.set_time(110).unwrap();
        assert_eq!(broker.drain("r").unwrap().len(), 1);
        assert!(broker.set_time(50).is_err());
    }

    #[test]
    fn no_retro_delivery() {
        let mut broker = Broker::new(0);
        broker.subscribe("early", "a").unwrap();
        broker.publish("p", "a", StateMap::new()).unwrap();
        broker.subscribe("late", "a").unwrap();
        assert!(broker.drain("late").unwrap().is_empty());
        assert_eq!(broker.drain("early").unwrap().len(), 1);
    }
}
