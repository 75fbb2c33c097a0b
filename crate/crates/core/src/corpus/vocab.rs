use std::collections::{BTreeMap, HashMap};

use sha2::{Digest, Sha256};

use super::{CorpusError, CorpusPair};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const MASK: usize = 4;

pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";
/// Placeholder substituted for content tokens by the masking metric.
pub const MASK_TOKEN: &str = "<M>";

const RESERVED: [&str; 5] = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN, MASK_TOKEN];

/// Bijective token/id table with fixed reserved ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary whose non-reserved entries are `tokens`, in order.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut token_to_id: HashMap<String, usize> =
            id_to_token.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        for tok in tokens {
            let tok = tok.into();
            if token_to_id.contains_key(&tok) {
                return Err(CorpusError::DuplicateToken(tok));
            }
            token_to_id.insert(tok.clone(), id_to_token.len());
            id_to_token.push(tok);
        }
        Ok(Vocabulary {
            id_to_token,
            token_to_id,
        })
    }

    /// Counts tokens from texts, field names and values; keeps those seen at
    /// least `min_count` times, ordered by descending count then lexicographically.
    pub fn build(corpus: &[CorpusPair], min_count: usize) -> Result<Self, CorpusError> {
        if corpus.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        if min_count == 0 {
            return Err(CorpusError::InvalidMinCount);
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for pair in corpus {
            for tok in &pair.text {
                *counts.entry(tok).or_default() += 1;
            }
            for e in pair.record.entries() {
                *counts.entry(&e.field).or_default() += 1;
                *counts.entry(&e.value).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count && !RESERVED.contains(t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_tokens(kept.into_iter().map(|(t, _)| t))
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn is_reserved(id: usize) -> bool {
        id < RESERVED.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Hex SHA-256 over the tokens in id order; checkpoints are tied to it.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.id_to_token {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One token per line, reserved tokens included, in id order.
    pub fn to_text(&self) -> String {
        let mut s = self.id_to_token.join("\n");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < RESERVED.len() || lines[..RESERVED.len()] != RESERVED {
            return Err(CorpusError::MalformedVocabulary);
        }
        Self::from_tokens(lines[RESERVED.len()..].iter().copied())
    }
}
