use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Default cap on the number of (field, value) entries in one record.
pub const DEFAULT_MAX_ENTRIES: usize = 12;

/// One (field, value) entry of a record.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entry {
    pub field: String,
    pub value: String,
}

impl Entry {
    pub fn new(field: impl Into<String>, value: impl Into<String>) -> Self {
        Entry {
            field: field.into(),
            value: value.into(),
        }
    }
}

/// An ordered set of (field, value) pairs describing one entity or event.
///
/// Field names are unique within a record and each value is a single
/// whitespace-free token, so "this value was expressed" can be decided at the
/// token level.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Record {
    entries: Vec<Entry>,
}

impl Record {
    pub fn new(entries: Vec<Entry>) -> Result<Self, CorpusError> {
        Self::with_max_entries(entries, DEFAULT_MAX_ENTRIES)
    }

    pub fn with_max_entries(entries: Vec<Entry>, max_entries: usize) -> Result<Self, CorpusError> {
        if entries.is_empty() || entries.len() > max_entries {
            return Err(CorpusError::EntryCount {
                count: entries.len(),
                max: max_entries,
            });
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.field.is_empty() {
                return Err(CorpusError::EmptyField);
            }
            if !seen.insert(e.field.as_str()) {
                return Err(CorpusError::DuplicateField(e.field.clone()));
            }
            if e.value.is_empty() || e.value.chars().any(char::is_whitespace) {
                return Err(CorpusError::InvalidValue {
                    field: e.field.clone(),
                    value: e.value.clone(),
                });
            }
        }
        Ok(Record { entries })
    }

    /// Convenience constructor from `(field, value)` string pairs.
    pub fn from_pairs<F, V>(pairs: impl IntoIterator<Item = (F, V)>) -> Result<Self, CorpusError>
    where
        F: Into<String>,
        V: Into<String>,
    {
        Self::new(pairs.into_iter().map(|(f, v)| Entry::new(f, v)).collect())
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, field: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.field == field)
            .map(|e| e.value.as_str())
    }

    pub fn fields(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.field.as_str())
    }

    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.value.as_str())
    }

    pub fn field_set(&self) -> BTreeSet<&str> {
        self.fields().collect()
    }

    pub fn value_set(&self) -> BTreeSet<&str> {
        self.values().collect()
    }

    /// Field lookup table; handy when comparing two records field by field.
    pub fn as_map(&self) -> BTreeMap<&str, &str> {
        self.entries
            .iter()
            .map(|e| (e.field.as_str(), e.value.as_str()))
            .collect()
    }
}

/// A record together with its reference description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusPair {
    pub id: String,
    pub record: Record,
    pub text: Vec<String>,
}

impl CorpusPair {
    pub fn new(id: impl Into<String>, record: Record, text: Vec<String>) -> Result<Self, CorpusError> {
        let id = id.into();
        if text.is_empty() {
            return Err(CorpusError::EmptyText(id));
        }
        if text.iter().any(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(CorpusError::InvalidToken(id));
        }
        Ok(CorpusPair { id, record, text })
    }
}
