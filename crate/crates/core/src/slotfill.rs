//! Template baseline: turn the exemplar into a template by replacing its
//! content words with field slots, then fill the slots from the new record.

use serde::{Deserialize, Serialize};

use crate::corpus::Record;
use crate::dataprep::{is_number_token, FilterRule};
use crate::training::TrainingTriple;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateToken {
    Text(String),
    /// A content position typed by an exemplar field; `original` is the
    /// exemplar token, kept when the new record lacks the field.
    Slot { field: String, original: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub tokens: Vec<TemplateToken>,
}

impl Template {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn slot_count(&self) -> usize {
        self.tokens.iter().filter(|t| matches!(t, TemplateToken::Slot { .. })).count()
    }
}

/// [`extract_template_with`] using the starter keyword rules.
pub fn extract_template(x_e: &Record, y_e: &[String]) -> Template {
    extract_template_with(x_e, y_e, &FilterRule::starter_set())
}

/// Every occurrence of an `x_e` value becomes a slot for its field. When a
/// number is the value of several fields, a nearby keyword rule picks among
/// them; otherwise the first such field in record order wins.
pub fn extract_template_with(x_e: &Record, y_e: &[String], rules: &[FilterRule]) -> Template {
    let tokens = y_e
        .iter()
        .enumerate()
        .map(|(i, tok)| {
            let fields: Vec<&str> = x_e.entries().iter().filter(|e| &e.value == tok).map(|e| e.field.as_str()).collect();
            let field = match fields.as_slice() {
                [] => return TemplateToken::Text(tok.clone()),
                [only] => *only,
                many if is_number_token(tok) => nearest_keyword_field(y_e, i, many, rules).unwrap_or(many[0]),
                many => many[0],
            };
            TemplateToken::Slot {
                field: field.to_string(),
                original: tok.clone(),
            }
        })
        .collect();
    Template { tokens }
}

/// The candidate field named by the closest keyword around position `i`;
/// at equal distance the keyword after the number wins.
fn nearest_keyword_field<'a>(tokens: &[String], i: usize, candidates: &[&'a str], rules: &[FilterRule]) -> Option<&'a str> {
    let reach = rules.iter().map(|r| r.window).max().unwrap_or(0);
    for d in 1..=reach {
        let sides = [i.checked_add(d).filter(|j| *j < tokens.len()), i.checked_sub(d)];
        for j in sides.into_iter().flatten() {
            for rule in rules.iter().filter(|r| r.window >= d && r.matches(&tokens[j])) {
                if let Some(f) = candidates.iter().find(|c| rule.fields.iter().any(|f| f == *c)) {
                    return Some(f);
                }
            }
        }
    }
    None
}

/// Replaces slots with `x`'s values. Slots for fields `x` lacks keep the
/// exemplar token, and values of `x` without a slot are dropped.
pub fn fill_template(template: &Template, x: &Record) -> Vec<String> {
    template
        .tokens
        .iter()
        .map(|t| match t {
            TemplateToken::Text(s) => s.clone(),
            TemplateToken::Slot { field, original } => x.get(field).unwrap_or(original).to_string(),
        })
        .collect()
}

/// Baseline output for one triple.
pub fn slot_fill(triple: &TrainingTriple) -> Vec<String> {
    fill_template(&extract_template(&triple.x_e, &triple.y_e), &triple.x)
}
