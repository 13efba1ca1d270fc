//! Name-keyed registry of interchangeable strategies.

use crate::error::{Error, Result};

/// Ordered map from names to boxed strategy objects.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(String, Box<T>)>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, entries: Vec::new() }
    }

    /// Adds or replaces the entry for `name`.
    pub fn register(&mut self, name: &str, value: Box<T>) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((name.to_string(), value)),
        }
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_ref()).ok_or_else(|| Error::UnknownName {
            kind: self.kind,
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }

    /// Registered names in registration order.
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }
}
