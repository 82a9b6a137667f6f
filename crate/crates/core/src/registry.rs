//! Name-keyed collections of interchangeable algorithm implementations.

use std::sync::Arc;

use crate::error::{Error, Result};

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(String, Arc<T>)>,
}

impl<T: ?Sized> Registry<T> {
    /// `kind` names the category in lookup errors, e.g. "mask strategy".
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Adds or replaces the entry called `name`.
    pub fn register(&mut self, name: &str, item: Arc<T>) {
        let key = normalize(name);
        match self.entries.iter_mut().find(|(n, _)| *n == key) {
            Some(slot) => slot.1 = item,
            None => self.entries.push((key, item)),
        }
    }

    /// Case-insensitive lookup; `-` and `_` are ignored.
    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        let key = normalize(name);
        self.entries
            .iter()
            .find(|(n, _)| *n == key)
            .map(|(_, item)| Arc::clone(item))
            .ok_or_else(|| Error::UnknownName {
                kind: self.kind,
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }
}

fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| *c != '-' && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}
