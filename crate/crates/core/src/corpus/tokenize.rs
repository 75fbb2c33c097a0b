use std::collections::BTreeMap;

use super::CorpusError;

const TERMINAL_PUNCT: [char; 4] = ['.', ',', '!', '?'];

/// Lowercase, split on whitespace, and peel terminal punctuation (`. , ! ?`)
/// off the end of each word into separate tokens.
///
/// Underscore-joined values such as `the_golden_curry` stay single tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let word = word.to_lowercase();
        let stem = word.trim_end_matches(TERMINAL_PUNCT);
        if !stem.is_empty() {
            out.push(stem.to_string());
        }
        for c in word[stem.len()..].chars() {
            out.push(c.to_string());
        }
    }
    out
}

pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

/// Rewrites of boolean-like raw values into phrase tokens, keyed by
/// lowercased field name then lowercased raw value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueNormalizer {
    rewrites: BTreeMap<String, BTreeMap<String, String>>,
}

impl Default for ValueNormalizer {
    fn default() -> Self {
        let mut n = ValueNormalizer::empty();
        n.add_rewrite("familyFriendly", "yes", "family_friendly");
        n.add_rewrite("familyFriendly", "no", "not_family_friendly");
        n
    }
}

impl ValueNormalizer {
    pub fn empty() -> Self {
        ValueNormalizer {
            rewrites: BTreeMap::new(),
        }
    }

    pub fn add_rewrite(&mut self, field: &str, raw: &str, phrase: &str) {
        self.rewrites
            .entry(field.to_lowercase())
            .or_default()
            .insert(raw.trim().to_lowercase(), phrase.to_string());
    }

    /// Normalize a raw value into a single lowercase token.
    pub fn normalize(&self, field: &str, raw: &str) -> Result<String, CorpusError> {
        let lowered = raw.trim().to_lowercase();
        if lowered.is_empty() {
            return Err(CorpusError::EmptyValue(field.to_string()));
        }
        if let Some(phrase) = self
            .rewrites
            .get(&field.to_lowercase())
            .and_then(|m| m.get(&lowered))
        {
            return Ok(phrase.clone());
        }
        Ok(lowered.split_whitespace().collect::<Vec<_>>().join("_"))
    }
}

/// [`ValueNormalizer::normalize`] with the default rewrite table.
pub fn normalize_value(field: &str, raw: &str) -> Result<String, CorpusError> {
    ValueNormalizer::default().normalize(field, raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn splits_terminal_punctuation() {
        assert_eq!(tokenize("Come try Cocum."), toks(&["come", "try", "cocum", "."]));
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("   "), Vec::<String>::new());
        assert_eq!(
            tokenize("priced £20-25 , near riverside"),
            toks(&["priced", "£20-25", ",", "near", "riverside"])
        );
        assert_eq!(tokenize("zizzi?!"), toks(&["zizzi", "?", "!"]));
        assert_eq!(tokenize("..."), toks(&[".", ".", "."]));
    }

    #[test]
    fn underscore_values_survive() {
        assert_eq!(tokenize("The_Golden_Curry, ok"), toks(&["the_golden_curry", ",", "ok"]));
    }

    #[test]
    fn normalizes_values() {
        assert_eq!(normalize_value("Name", "The Golden Curry").unwrap(), "the_golden_curry");
        assert_eq!(normalize_value("FamilyFriendly", "no").unwrap(), "not_family_friendly");
        assert_eq!(normalize_value("familyFriendly", "Yes").unwrap(), "family_friendly");
        assert_eq!(normalize_value("PTS", "18").unwrap(), "18");
        assert!(normalize_value("PTS", "  ").is_err());
    }
}
