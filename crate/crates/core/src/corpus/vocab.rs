use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Bidirectional map between surface strings and dense ids, assigned in first-seen order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `surface`, assigning the next free id if it is new.
    pub fn intern(&mut self, surface: &str) -> u32 {
        if let Some(&id) = self.index.get(surface) {
            return id;
        }
        let id = self.entries.len() as u32;
        self.entries.push(surface.to_string());
        self.index.insert(surface.to_string(), id);
        id
    }

    pub fn get(&self, surface: &str) -> Option<u32> {
        self.index.get(surface).copied()
    }

    /// Panics on an out-of-range id.
    pub fn surface(&self, id: u32) -> &str {
        &self.entries[id as usize]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.entries.iter().enumerate().map(|(i, s)| (i as u32, s.as_str()))
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(entries: Vec<String>) -> Self {
        let mut v = Vocabulary::new();
        for e in &entries {
            v.intern(e);
        }
        v
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.entries
    }
}
