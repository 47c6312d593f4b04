//! Name-keyed registries for interchangeable strategies.
//!
//! Steppers, advection face schemes and face means are all looked up by the
//! name used in scenario files. Each registry keeps insertion order so that
//! listings are stable.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown {kind} `{name}` (available: {available})")]
pub struct UnknownEntry {
    pub kind: &'static str,
    pub name: String,
    pub available: String,
}

/// A registered strategy together with a one-line description.
#[derive(Debug, Clone)]
pub struct Entry<T> {
    pub name: &'static str,
    pub description: &'static str,
    pub value: T,
}

#[derive(Debug, Clone)]
pub struct Registry<T> {
    kind: &'static str,
    entries: Vec<Entry<T>>,
}

impl<T> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Registers `value` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: &'static str, description: &'static str, value: T) {
        let entry = Entry {
            name,
            description,
            value,
        };
        match self.entries.iter_mut().find(|e| e.name == name) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn with(mut self, name: &'static str, description: &'static str, value: T) -> Self {
        self.register(name, description, value);
        self
    }

    pub fn get(&self, name: &str) -> Result<&T, UnknownEntry> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| &e.value)
            .ok_or_else(|| UnknownEntry {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = &Entry<T>> {
        self.entries.iter()
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}
