use std::collections::BTreeMap;

use crate::model::{KeyVersion, KeyWrite, TOMBSTONE};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    /// `None` once deleted.
    value: Option<String>,
    version: u64,
}

/// Versioned key-value store. Keys never written (including preloaded ones) are at version 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldState {
    entries: BTreeMap<String, Entry>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Genesis data: present at version 0.
    pub fn preload(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(
            key.into(),
            Entry {
                value: Some(value.into()),
                version: 0,
            },
        );
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).and_then(|e| e.value.as_deref())
    }

    pub fn version(&self, key: &str) -> u64 {
        self.entries.get(key).map_or(0, |e| e.version)
    }

    pub fn read(&self, key: &str) -> (Option<&str>, KeyVersion) {
        (self.get(key), KeyVersion::new(key, self.version(key)))
    }

    /// Live keys in `[start, end)` with their versions.
    pub fn scan(&self, start: &str, end: &str) -> Vec<KeyVersion> {
        if start >= end {
            return Vec::new();
        }
        self.entries
            .range::<str, _>((std::ops::Bound::Included(start), std::ops::Bound::Excluded(end)))
            .filter(|(_, e)| e.value.is_some())
            .map(|(k, e)| KeyVersion::new(k.clone(), e.version))
            .collect()
    }

    /// Commits one write, bumping the key's version by one.
    pub fn apply(&mut self, w: &KeyWrite) {
        let e = self.entries.entry(w.key.clone()).or_insert(Entry {
            value: None,
            version: 0,
        });
        e.version += 1;
        e.value = (w.value != TOMBSTONE).then(|| w.value.clone());
    }

    pub fn len(&self) -> usize {
        self.entries.values().filter(|e| e.value.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
