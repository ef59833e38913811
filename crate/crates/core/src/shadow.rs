//! Device shadows: per-robot desired/reported state with a derived delta.

use crate::value::StateMap;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShadowError {
    #[error("unknown thing `{0}`")]
    UnknownThing(String),
    #[error("thing `{0}` is already registered")]
    AlreadyRegistered(String),
    #[error("patch key `{0}` is both set and cleared")]
    ConflictingPatch(String),
}

/// Returns every desired entry that `reported` does not already agree with.
pub fn compute_delta(desired: &StateMap, reported: &StateMap) -> StateMap {
    desired
        .iter()
        .filter(|(k, v)| reported.get(*k) != Some(*v))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Snapshot of one thing's shadow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowDocument {
    pub thing_id: String,
    pub version: u64,
    pub desired: StateMap,
    pub reported: StateMap,
    pub delta: StateMap,
    pub last_updated: u64,
}

impl ShadowDocument {
    fn new(thing_id: &str, now: u64) -> Self {
        ShadowDocument {
            thing_id: thing_id.to_string(),
            version: 1,
            desired: StateMap::new(),
            reported: StateMap::new(),
            delta: StateMap::new(),
            last_updated: now,
        }
    }

    fn refresh_delta(&mut self) {
        self.delta = compute_delta(&self.desired, &self.reported);
    }
}

/// A set of entries to merge plus keys to clear.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatePatch {
    entries: StateMap,
    tombstones: BTreeSet<String>,
}

impl StatePatch {
    pub fn new(entries: StateMap, tombstones: BTreeSet<String>) -> Result<Self, ShadowError> {
        if let Some(key) = tombstones.iter().find(|k| entries.contains_key(*k)) {
            return Err(ShadowError::ConflictingPatch(key.clone()));
        }
        Ok(StatePatch {
            entries,
            tombstones,
        })
    }

    pub fn entries(&self) -> &StateMap {
        &self.entries
    }

    pub fn tombstones(&self) -> &BTreeSet<String> {
        &self.tombstones
    }

    fn apply(&self, target: &mut StateMap) {
        for key in &self.tombstones {
            target.remove(key);
        }
        for (k, v) in &self.entries {
            target.insert(k.clone(), v.clone());
        }
    }
}

impl From<StateMap> for StatePatch {
    fn from(entries: StateMap) -> Self {
        StatePatch {
            entries,
            tombstones: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestCounts {
    pub reads: u64,
    pub writes: u64,
}

impl RequestCounts {
    pub fn total(&self) -> u64 {
        self.reads + self.writes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Desired,
    Reported,
}

#[derive(Debug, Default)]
pub struct ShadowStore {
    now: u64,
    docs: BTreeMap<String, ShadowDocument>,
    requests: BTreeMap<String, RequestCounts>,
}

impl ShadowStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_time(&mut self, now: u64) {
        self.now = self.now.max(now);
    }

    pub fn register(&mut self, thing_id: &str) -> Result<&ShadowDocument, ShadowError> {
        if self.docs.contains_key(thing_id) {
            return Err(ShadowError::AlreadyRegistered(thing_id.to_string()));
        }
        self.requests.insert(thing_id.to_string(), RequestCounts::default());
        Ok(self
            .docs
            .entry(thing_id.to_string())
            .or_insert_with(|| ShadowDocument::new(thing_id, self.now)))
    }

    pub fn contains(&self, thing_id: &str) -> bool {
        self.docs.contains_key(thing_id)
    }

    pub fn update_reported(
        &mut self,
        thing_id: &str,
        patch: &StatePatch,
    ) -> Result<ShadowDocument, ShadowError> {
        self.update(thing_id, patch, Side::Reported)
    }

    pub fn update_desired(
        &mut self,
        thing_id: &str,
        patch: &StatePatch,
    ) -> Result<ShadowDocument, ShadowError> {
        self.update(thing_id, patch, Side::Desired)
    }

    fn update(
        &mut self,
        thing_id: &str,
        patch: &StatePatch,
        side: Side,
    ) -> Result<ShadowDocument, ShadowError> {
        let doc = self
            .docs
            .get_mut(thing_id)
            .ok_or_else(|| ShadowError::UnknownThing(thing_id.to_string()))?;
        match side {
            Side::Desired => patch.apply(&mut doc.desired),
            Side::Reported => patch.apply(&mut doc.reported),
        }
        doc.version += 1;
        doc.last_updated = self.now;
        doc.refresh_delta();
        if let Some(counts) = self.requests.get_mut(thing_id) {
            counts.writes += 1;
        }
        Ok(doc.clone())
    }

    /// Reads a snapshot. Counts as one shadow request; does not bump the version.
    pub fn get_shadow(&mut self, thing_id: &str) -> Result<ShadowDocument, ShadowError> {
        let doc = self
            .docs
            .get(thing_id)
            .ok_or_else(|| ShadowError::UnknownThing(thing_id.to_string()))?;
        if let Some(counts) = self.requests.get_mut(thing_id) {
            counts.reads += 1;
        }
        Ok(doc.clone())
    }

    /// Reads without touching the request counters (instrumentation only).
    pub fn peek(&self, thing_id: &str) -> Option<&ShadowDocument> {
        self.docs.get(thing_id)
    }

    pub fn request_counts(&self, thing_id: &str) -> Option<RequestCounts> {
        self.requests.get(thing_id).copied()
    }

    pub fn total_requests(&self) -> RequestCounts {
        self.requests
            .values()
            .fold(RequestCounts::default(), |acc, c| RequestCounts {
                reads: acc.reads + c.reads,
                writes: acc.writes + c.writes,
            })
    }

    pub fn documents(&self) -> impl Iterator<Item = &ShadowDocument> {
        self.docs.values()
    }
}

/// Multi-reader handle for interactive sessions.
#[derive(Debug, Clone, Default)]
pub struct SharedShadowStore(Arc<RwLock<ShadowStore>>);

impl SharedShadowStore {
    pub fn new(store: ShadowStore) -> Self {
        SharedShadowStore(Arc::new(RwLock::new(store)))
    }

    pub fn update_reported(
        &self,
        thing_id: &str,
        patch: &StatePatch,
    ) -> Result<ShadowDocument, ShadowError> {
        self.0
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .update_reported(thing_id, patch)
    }

    pub fn get_shadow(&self, thing_id: &str) -> Result<ShadowDocument, ShadowError> {
        self.0
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .get_shadow(thing_id)
    }

    pub fn register(&self, thing_id: &str) -> Result<(), ShadowError> {
        self.0
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .register(thing_id)
            .map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_map;

    fn store_with(thing: &str) -> ShadowStore {
        let mut store = ShadowStore::new();
        store.register(thing).unwrap();
        store
    }

    #[test]
    fn reported_status_bumps_version() {
        let mut store = store_with("placebot1");
        let doc = store
            .update_reported("placebot1", &state_map! {"status" => "Task Completed"}.into())
            .unwrap();
        assert_eq!(doc.reported.len(), 1);
        assert_eq!(doc.version, 2);
        let read = store.get_shadow("placebot1").unwrap();
        assert_eq!(read.reported.get("status").unwrap().as_str(), Some("Task Completed"));
    }

    #[test]
    fn empty_patch_still_increments_version() {
        let mut store = store_with("r");
        let doc = store.update_reported("r", &StatePatch::default()).unwrap();
        assert_eq!(doc.version, 2);
        assert!(doc.reported.is_empty());
    }

    #[test]
    fn desired_creates_delta() {
        let mut store = store_with("r");
        let doc = store.update_desired("r", &state_map! {"zone" => "A"}.into()).unwrap();
        assert_eq!(doc.delta, state_map! {"zone" => "A"});
        let doc = store.update_reported("r", &state_map! {"zone" => "A"}.into()).unwrap();
        assert!(doc.delta.is_empty());
    }

    #[test]
    fn reads_are_idempotent_and_counted() {
        let mut store = store_with("r");
        let a = store.get_shadow("r").unwrap();
        let b = store.get_shadow("r").unwrap();
        assert_eq!(a, b);
        assert_eq!(store.request_counts("r").unwrap(), RequestCounts { reads: 2, writes: 0 });
    }

    #[test]
    fn unknown_thing_errors() {
        let mut store = ShadowStore::new();
        assert!(matches!(store.get_shadow("x"), Err(ShadowError::UnknownThing(_))));
        assert!(matches!(
            store.update_reported("x", &StatePatch::default()),
            Err(ShadowError::UnknownThing(_))
        ));
    }

    #[test]
    fn tombstones_clear_keys_and_conflicts_rejected() {
        let mut store = store_with("r");
        store.update_reported("r", &state_map! {"cargo" => "pkg"}.into()).unwrap();
        let patch = StatePatch::new(StateMap::new(), ["cargo".to_string()].into()).unwrap();
        let doc = store.update_reported("r", &patch).unwrap();
        assert!(doc.reported.is_empty());
        assert!(StatePatch::new(state_map! {"a" => 1i64}, ["a".to_string()].into()).is_err());
    }

    #[test]
    fn delta_examples() {
        assert!(compute_delta(&StateMap::new(), &state_map! {"x" => 1i64}).is_empty());
        assert!(compute_delta(&state_map! {"zone" => "A"}, &state_map! {"zone" => "A"}).is_empty());
        assert_eq!(
            compute_delta(&state_map! {"zone" => "A"}, &state_map! {"zone" => "B"}),
            state_map! {"zone" => "A"}
        );
    }

    #[test]
    fn document_serializes_with_delta() {
        let mut store = store_with("r");
        store.update_desired("r", &state_map! {"zone" => "A"}.into()).unwrap();
        let json = serde_json::to_value(store.peek("r").unwrap()).unwrap();
        for key in ["thing_id", "version", "desired", "reported", "delta", "last_updated"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
