//! Name-keyed registry of interchangeable algorithm implementations.

use crate::error::{Error, Result};

pub struct Registry<T: ?Sized + 'static> {
    kind: &'static str,
    entries: &'static [(&'static str, fn() -> Box<T>)],
}

impl<T: ?Sized + 'static> Registry<T> {
    pub const fn new(kind: &'static str, entries: &'static [(&'static str, fn() -> Box<T>)]) -> Self {
        Registry { kind, entries }
    }

    pub fn get(&self, name: &str) -> Result<Box<T>> {
        self.entries
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, make)| make())
            .ok_or_else(|| Error::Unknown {
                kind: self.kind,
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n.eq_ignore_ascii_case(name))
    }
}
