use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::entities::{find_entities, normalize_entity, EntityLexicon};
use super::numbers::words_to_number;
use super::DataprepError;
use crate::corpus::{Entry, Record, DEFAULT_MAX_ENTRIES};

/// One box-score cell: `entity` scored `value` in `field`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub entity: String,
    pub field: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreTable {
    rows: Vec<TableRow>,
    lexicon: EntityLexicon,
}

impl ScoreTable {
    /// Builds a table whose lexicon is the set of row entities plus `extra_names`.
    ///
    /// Entities and values are normalized to single lowercase tokens.
    pub fn new<I, S>(rows: Vec<TableRow>, extra_names: I) -> Result<Self, DataprepError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = BTreeSet::new();
        let mut lexicon = EntityLexicon::new(extra_names);
        let mut normalized = Vec::with_capacity(rows.len());
        for row in rows {
            let entity = normalize_entity(&row.entity);
            let value = row.value.trim().to_lowercase().split_whitespace().collect::<Vec<_>>().join("_");
            if entity.is_empty() || value.is_empty() || row.field.is_empty() {
                return Err(DataprepError::InvalidRow(format!("{row:?}")));
            }
            if !seen.insert((entity.clone(), row.field.clone())) {
                return Err(DataprepError::DuplicateCell {
                    entity,
                    field: row.field,
                });
            }
            lexicon.insert(&entity);
            normalized.push(TableRow {
                entity,
                field: row.field,
                value,
            });
        }
        Ok(ScoreTable {
            rows: normalized,
            lexicon,
        })
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn lexicon(&self) -> &EntityLexicon {
        &self.lexicon
    }
}

/// A field-indicative keyword: a number within `window` tokens of `trigger`
/// may only be read as one of `fields`.
///
/// Triggers match by prefix, so `assist` also fires on `assists`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRule {
    pub trigger: String,
    pub fields: Vec<String>,
    pub window: usize,
}

pub const DEFAULT_RULE_WINDOW: usize = 3;

impl FilterRule {
    pub fn new(trigger: &str, fields: &[&str], window: usize) -> Result<Self, DataprepError> {
        let rule = FilterRule {
            trigger: trigger.to_lowercase(),
            fields: fields.iter().map(|f| f.to_string()).collect(),
            window,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<(), DataprepError> {
        if self.fields.is_empty() || self.trigger.is_empty() {
            return Err(DataprepError::InvalidRule(self.trigger.clone()));
        }
        Ok(())
    }

    pub fn matches(&self, token: &str) -> bool {
        token.to_lowercase().starts_with(&self.trigger)
    }

    /// Starter rule set for box-score fields.
    pub fn starter_set() -> Vec<FilterRule> {
        let w = DEFAULT_RULE_WINDOW;
        [
            ("point", &["PTS"][..]),
            ("rebound", &["REB", "OREB", "DREB"][..]),
            ("board", &["REB", "OREB", "DREB"][..]),
            ("assist", &["AST"][..]),
            ("dime", &["AST"][..]),
            ("steal", &["STL"][..]),
            ("block", &["BLK"][..]),
            ("turnover", &["TO"][..]),
            ("minute", &["MIN"][..]),
            ("foul", &["PF"][..]),
        ]
        .into_iter()
        .map(|(t, f)| FilterRule::new(t, f, w).expect("starter rules are valid"))
        .collect()
    }
}

/// Rules that fire for a number occupying `tokens[start..end]`.
pub fn triggered_rules<'r>(
    tokens: &[String],
    start: usize,
    end: usize,
    rules: &'r [FilterRule],
) -> Vec<&'r FilterRule> {
    rules
        .iter()
        .filter(|rule| {
            let lo = start.saturating_sub(rule.window);
            let hi = (end - 1 + rule.window).min(tokens.len().saturating_sub(1));
            (lo..=hi)
                .filter(|j| *j < start || *j >= end)
                .any(|j| rule.matches(&tokens[j]))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignConfig {
    /// Field name for mentioned entities; later mentions get `_2`, `_3`, ...
    pub entity_field: String,
    pub max_entries: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            entity_field: "PLAYER".into(),
            max_entries: DEFAULT_MAX_ENTRIES,
        }
    }
}

struct Candidate {
    row: usize,
    number_pos: usize,
    preferred: bool,
}

/// Aligns one sentence with a box-score table.
///
/// Entities and numbers in the sentence are paired; every table row with the
/// same entity and value becomes a candidate unless a rule triggered near
/// the number excludes its field. When two surviving rows share a field,
/// the one explicitly allowed by a triggered rule wins, then table order.
pub fn align_records(
    sentence: &[String],
    table: &ScoreTable,
    rules: &[FilterRule],
    config: &AlignConfig,
) -> Result<Record, DataprepError> {
    if sentence.is_empty() {
        return Err(DataprepError::EmptySentence);
    }
    let (tokens, mentions) = find_entities(sentence, table.lexicon());
    let mentioned: Vec<&str> = {
        let mut seen = BTreeSet::new();
        mentions
            .iter()
            .map(|(_, e)| e.as_str())
            .filter(|e| seen.insert(*e))
            .collect()
    };
    let entity_positions: BTreeSet<usize> = mentions.iter().map(|(p, _)| *p).collect();

    let mut numbers = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if !entity_positions.contains(&i) {
            if let Some((n, k)) = words_to_number(&tokens[i..]) {
                numbers.push((i, i + k, n));
                i += k;
                continue;
            }
        }
        i += 1;
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    for entity in &mentioned {
        for &(start, end, n) in &numbers {
            let fired = triggered_rules(&tokens, start, end, rules);
            for (row_idx, row) in table.rows().iter().enumerate() {
                if row.entity != *entity || !value_matches(&row.value, n) {
                    continue;
                }
                if fired.iter().any(|r| !r.fields.contains(&row.field)) {
                    continue;
                }
                if candidates.iter().any(|c| c.row == row_idx) {
                    continue;
                }
                candidates.push(Candidate {
                    row: row_idx,
                    number_pos: start,
                    preferred: !fired.is_empty(),
                });
            }
        }
    }

    // one row per field: rule-preferred first, then table order
    let mut by_field: BTreeMap<&str, &Candidate> = BTreeMap::new();
    for c in &candidates {
        let field = table.rows()[c.row].field.as_str();
        match by_field.get(field) {
            Some(prev) if (prev.preferred, std::cmp::Reverse(prev.row)) >= (c.preferred, std::cmp::Reverse(c.row)) => {}
            _ => {
                by_field.insert(field, c);
            }
        }
    }
    if by_field.is_empty() {
        return Err(DataprepError::NoScoreEntries);
    }
    let mut kept: Vec<&Candidate> = by_field.into_values().collect();
    kept.sort_by_key(|c| (c.number_pos, c.row));

    let mut entries = Vec::with_capacity(mentioned.len() + kept.len());
    for (k, entity) in mentioned.iter().enumerate() {
        let field = if k == 0 {
            config.entity_field.clone()
        } else {
            format!("{}_{}", config.entity_field, k + 1)
        };
        entries.push(Entry::new(field, *entity));
    }
    for c in kept {
        let row = &table.rows()[c.row];
        entries.push(Entry::new(row.field.clone(), row.value.clone()));
    }
    Ok(Record::with_max_entries(entries, config.max_entries)?)
}

fn value_matches(value: &str, n: u32) -> bool {
    value.parse::<u32>().map(|v| v == n).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn row(e: &str, f: &str, v: &str) -> TableRow {
        TableRow {
            entity: e.into(),
            field: f.into(),
            value: v.into(),
        }
    }

    fn table(rows: Vec<TableRow>) -> ScoreTable {
        ScoreTable::new(rows, Vec::<String>::new()).unwrap()
    }

    #[test]
    fn simple_alignment() {
        let t = table(vec![row("Dwight Howard", "PTS", "10"), row("Dwight Howard", "REB", "7")]);
        let r = align_records(&tokenize("dwight_howard scored 10 points"), &t, &[], &AlignConfig::default()).unwrap();
        assert_eq!(r, Record::from_pairs([("PLAYER", "dwight_howard"), ("PTS", "10")]).unwrap());
    }

    #[test]
    fn keyword_resolves_ambiguity() {
        let t = table(vec![row("x", "PTS", "10"), row("x", "AST", "10")]);
        let s = tokenize("x handed out 10 assists");
        let r = align_records(&s, &t, &FilterRule::starter_set(), &AlignConfig::default()).unwrap();
        assert_eq!(r.get("AST"), Some("10"));
        assert_eq!(r.get("PTS"), None);
        // without rules both rows survive
        let r = align_records(&s, &t, &[], &AlignConfig::default()).unwrap();
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn english_numbers_pair_with_digits() {
        let t = table(vec![row("Dwight Howard", "REB", "12")]);
        let r = align_records(
            &tokenize("Dwight Howard grabbed twelve rebounds"),
            &t,
            &FilterRule::starter_set(),
            &AlignConfig::default(),
        )
        .unwrap();
        assert_eq!(r.get("REB"), Some("12"));
    }

    #[test]
    fn degenerate_inputs() {
        let t = table(vec![row("x", "PTS", "10")]);
        assert!(matches!(
            align_records(&[], &t, &[], &AlignConfig::default()),
            Err(DataprepError::EmptySentence)
        ));
        assert!(matches!(
            align_records(&tokenize("nobody scored 10"), &t, &[], &AlignConfig::default()),
            Err(DataprepError::NoScoreEntries)
        ));
    }

    #[test]
    fn field_collisions_prefer_rules_then_table_order() {
        let t = table(vec![
            row("a", "PTS", "10"),
            row("b", "PTS", "12"),
            row("a", "REB", "5"),
        ]);
        let cfg = AlignConfig::default();
        let r = align_records(&tokenize("a and b had 10 and 12"), &t, &[], &cfg).unwrap();
        assert_eq!(r.get("PTS"), Some("10"));
        assert_eq!(r.get("PLAYER_2"), Some("b"));
        let r = align_records(&tokenize("a had 10 , b 12 points"), &t, &FilterRule::starter_set(), &cfg).unwrap();
        assert_eq!(r.get("PTS"), Some("12"));
    }

    #[test]
    fn rejects_duplicate_cells() {
        assert!(ScoreTable::new(vec![row("x", "PTS", "1"), row("X", "PTS", "2")], Vec::<String>::new()).is_err());
        assert!(FilterRule::new("assist", &[], 3).is_err());
    }
}
