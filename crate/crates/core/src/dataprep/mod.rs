//! Box-score alignment: turns (sentence, score table) pairs into records.

mod align;
mod entities;
mod numbers;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use thiserror::Error;

pub use align::{
    align_records, triggered_rules, AlignConfig, FilterRule, ScoreTable, TableRow, DEFAULT_RULE_WINDOW,
};
pub use entities::{find_entities, normalize_entity, EntityLexicon};
pub use numbers::{is_number_token, words_to_number};

use crate::corpus::CorpusError;

#[derive(Debug, Error)]
pub enum DataprepError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("sentence aligns to no score entries")]
    NoScoreEntries,
    #[error("table lists ({entity}, {field}) more than once")]
    DuplicateCell { entity: String, field: String },
    #[error("invalid table row {0}")]
    InvalidRow(String),
    #[error("filter rule {0:?} needs a trigger and at least one field")]
    InvalidRule(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Record(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataprepError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DataprepError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads `{"entity", "field", "value"}` lines.
pub fn load_score_table(path: impl AsRef<Path>) -> Result<ScoreTable, DataprepError> {
    ScoreTable::new(read_jsonl(path.as_ref())?, Vec::<String>::new())
}

/// Reads `{"trigger", "fields", "window"}` lines.
pub fn load_filter_rules(path: impl AsRef<Path>) -> Result<Vec<FilterRule>, DataprepError> {
    let rules: Vec<FilterRule> = read_jsonl(path.as_ref())?;
    for r in &rules {
        r.validate()?;
    }
    Ok(rules)
}
