use std::collections::BTreeSet;

/// Known multi-word names (players, teams, cities), stored as lowercase word
/// sequences.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityLexicon {
    names: BTreeSet<Vec<String>>,
    longest: usize,
}

fn words(name: &str) -> Vec<String> {
    name.split(|c: char| c == '_' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// `"Dwight Howard"` → `"dwight_howard"`.
pub fn normalize_entity(name: &str) -> String {
    words(name).join("_")
}

impl EntityLexicon {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = EntityLexicon::default();
        for n in names {
            lex.insert(n.as_ref());
        }
        lex
    }

    pub fn insert(&mut self, name: &str) {
        let w = words(name);
        if !w.is_empty() {
            self.longest = self.longest.max(w.len());
            self.names.insert(w);
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(&words(name))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Normalized names, sorted.
    pub fn names(&self) -> impl Iterator<Item = String> + '_ {
        self.names.iter().map(|w| w.join("_"))
    }

    /// Length in tokens of the longest name starting at `tokens[0]`.
    fn match_len(&self, tokens: &[String]) -> Option<usize> {
        let upto = self.longest.min(tokens.len());
        (1..=upto).rev().find(|&k| {
            let cand: Vec<String> = tokens[..k].iter().map(|t| t.to_lowercase()).collect();
            if k == 1 {
                // an already-collapsed `a_b` token counts as a match for "a b"
                self.names.contains(&words(&cand[0]))
            } else {
                self.names.contains(&cand)
            }
        })
    }
}

/// Left-to-right, longest-match entity recognition.
///
/// Returns the sentence with every matched name collapsed to one
/// underscore-joined token, and `(position, token)` for each match, where
/// positions index the collapsed sentence.
pub fn find_entities(sentence: &[String], lexicon: &EntityLexicon) -> (Vec<String>, Vec<(usize, String)>) {
    let mut out = Vec::with_capacity(sentence.len());
    let mut found = Vec::new();
    let mut i = 0;
    while i < sentence.len() {
        match lexicon.match_len(&sentence[i..]) {
            Some(k) => {
                let tok = sentence[i..i + k]
                    .iter()
                    .flat_map(|t| words(t))
                    .collect::<Vec<_>>()
                    .join("_");
                found.push((out.len(), tok.clone()));
                out.push(tok);
                i += k;
            }
            None => {
                out.push(sentence[i].clone());
                i += 1;
            }
        }
    }
    (out, found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn collapses_multiword_names() {
        let lex = EntityLexicon::new(["Dwight Howard"]);
        let (sent, found) = find_entities(&tokenize("Dwight Howard scored"), &lex);
        assert_eq!(found, vec![(0, "dwight_howard".to_string())]);
        assert_eq!(sent, vec!["dwight_howard", "scored"]);
    }

    #[test]
    fn no_hits() {
        let lex = EntityLexicon::new(["Dwight Howard"]);
        let (sent, found) = find_entities(&tokenize("nobody scored"), &lex);
        assert!(found.is_empty());
        assert_eq!(sent.len(), 2);
    }

    #[test]
    fn longest_match_wins_regardless_of_insertion_order() {
        for order in [["golden curry", "the golden curry"], ["the golden curry", "golden curry"]] {
            let lex = EntityLexicon::new(order);
            let (_, found) = find_entities(&tokenize("try the golden curry now"), &lex);
            assert_eq!(found, vec![(1, "the_golden_curry".to_string())]);
            let (_, found) = find_entities(&tokenize("a golden curry"), &lex);
            assert_eq!(found, vec![(1, "golden_curry".to_string())]);
        }
    }

    #[test]
    fn accepts_already_normalized_tokens() {
        let lex = EntityLexicon::new(["dwight_howard"]);
        let (_, found) = find_entities(&tokenize("dwight_howard scored"), &lex);
        assert_eq!(found, vec![(0, "dwight_howard".to_string())]);
    }
}
