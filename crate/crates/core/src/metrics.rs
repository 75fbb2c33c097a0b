//! Style and content scores.
//!
//! m-BLEU compares a generation with its exemplar after masking content
//! tokens, so it rewards copied wording and ignores copied facts. Content
//! fidelity checks which record values a generation expresses by exact token
//! match, which is sound because every value is a single token.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{CorpusPair, Record, MASK_TOKEN};
use crate::training::TrainingTriple;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("nothing to score")]
    Empty,
    #[error("{candidates} candidates but {references} references")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("no generation for instance {0:?}")]
    MissingGeneration(String),
    #[error("generation for unknown or repeated instance {0:?}")]
    UnexpectedGeneration(String),
    #[error("content lexicon is empty")]
    EmptyLexicon,
}

/// Rule deciding which tokens count as numerals.
pub const NUMERAL_RULE: &str = "contains-ascii-digit";

/// Tokens treated as content: every record value of a dataset plus numerals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentLexicon {
    values: BTreeSet<String>,
    numeral_rule: String,
}

impl ContentLexicon {
    pub fn new<I, S>(values: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let values: BTreeSet<String> = values.into_iter().map(Into::into).collect();
        if values.is_empty() {
            return Err(MetricsError::EmptyLexicon);
        }
        Ok(ContentLexicon {
            values,
            numeral_rule: NUMERAL_RULE.to_string(),
        })
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a Record>) -> Result<Self, MetricsError> {
        Self::new(records.into_iter().flat_map(|r| r.values().map(str::to_string)))
    }

    pub fn from_pairs(pairs: &[CorpusPair]) -> Result<Self, MetricsError> {
        Self::from_records(pairs.iter().map(|p| &p.record))
    }

    /// Lexicon over both records of every triple.
    pub fn from_triples(triples: &[TrainingTriple]) -> Result<Self, MetricsError> {
        Self::from_records(triples.iter().flat_map(|t| [&t.x, &t.x_e]))
    }

    pub fn values(&self) -> &BTreeSet<String> {
        &self.values
    }

    pub fn is_numeral(token: &str) -> bool {
        token.bytes().any(|b| b.is_ascii_digit())
    }

    pub fn is_content(&self, token: &str) -> bool {
        self.values.contains(token) || Self::is_numeral(token)
    }

    /// Hex SHA-256 over the numeral rule and the sorted values.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.numeral_rule.as_bytes());
        for v in &self.values {
            h.update(b"\n");
            h.update(v.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Replaces every content token with the mask token.
pub fn mask_content<S: AsRef<str>>(tokens: &[S], lexicon: &ContentLexicon) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            if lexicon.is_content(t) {
                MASK_TOKEN.to_string()
            } else {
                t.to_string()
            }
        })
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *out.entry(g).or_insert(0) += 1;
        }
    }
    out
}

/// Corpus-level BLEU-4 on 0–100 without smoothing.
///
/// Orders for which the candidates contain no n-grams at all (every
/// candidate shorter than n) are left out of the geometric mean, so a
/// corpus of short sentences still scores 100 against itself.
pub fn corpus_bleu(candidates: &[Vec<String>], references: &[Vec<String>]) -> Result<f64, MetricsError> {
    if candidates.len() != references.len() {
        return Err(MetricsError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (c, r) in candidates.iter().zip(references) {
        c_len += c.len();
        r_len += r.len();
        for n in 1..=4 {
            let rc = ngram_counts(r, n);
            for (g, k) in ngram_counts(c, n) {
                matched[n - 1] += k.min(rc.get(g).copied().unwrap_or(0));
                total[n - 1] += k;
            }
        }
    }
    if c_len == 0 {
        return Ok(if r_len == 0 { 100.0 } else { 0.0 });
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 0..4 {
        if total[n] == 0 {
            continue;
        }
        if matched[n] == 0 {
            return Ok(0.0);
        }
        log_sum += (matched[n] as f64 / total[n] as f64).ln();
        orders += 1;
    }
    let bp = if c_len > r_len {
        1.0
    } else {
        (1.0 - r_len as f64 / c_len as f64).exp()
    };
    Ok(100.0 * bp * (log_sum / orders as f64).exp())
}

/// BLEU between masked candidates and masked references.
pub fn m_bleu(
    candidates: &[Vec<String>],
    references: &[Vec<String>],
    lexicon: &ContentLexicon,
) -> Result<f64, MetricsError> {
    let c: Vec<Vec<String>> = candidates.iter().map(|s| mask_content(s, lexicon)).collect();
    let r: Vec<Vec<String>> = references.iter().map(|s| mask_content(s, lexicon)).collect();
    corpus_bleu(&c, &r)
}

/// Per-instance content scores, as percentages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentScores {
    /// Share of the new record's values that appear.
    pub incl_new: f64,
    /// Share of exemplar-only values that do not appear.
    pub excl_old: f64,
    /// Share of distinct content tokens in the output that belong to the new record.
    pub precision: f64,
    pub recall: f64,
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        100.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn content_fidelity(generated: &[String], x: &Record, x_e: &Record, lexicon: &ContentLexicon) -> ContentScores {
    let out: BTreeSet<&str> = generated.iter().map(String::as_str).collect();
    let new = x.value_set();
    let old: BTreeSet<&str> = x_e.value_set().difference(&new).copied().collect();
    let incl = new.iter().filter(|v| out.contains(*v)).count();
    let excl = old.iter().filter(|v| !out.contains(*v)).count();
    let hits: Vec<&str> = out.iter().copied().filter(|t| lexicon.is_content(t)).collect();
    let correct = hits.iter().filter(|t| new.contains(*t)).count();
    let incl_new = percent(incl, new.len());
    ContentScores {
        incl_new,
        excl_old: percent(excl, old.len()),
        precision: percent(correct, hits.len()),
        recall: incl_new,
    }
}

/// Aggregate scores over a set of generations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub m_bleu: f64,
    pub incl_new: f64,
    pub excl_old: f64,
    pub precision: f64,
    pub recall: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceScores {
    pub id: String,
    pub distance: usize,
    #[serde(flatten)]
    pub scores: ContentScores,
}

/// A generation keyed by instance id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub id: String,
    pub tokens: Vec<String>,
}

fn align<'a>(
    triples: &'a [TrainingTriple],
    generations: &'a [Generation],
) -> Result<Vec<(&'a TrainingTriple, &'a [String])>, MetricsError> {
    let mut by_id: HashMap<&str, &[String]> = HashMap::new();
    for g in generations {
        if by_id.insert(g.id.as_str(), g.tokens.as_slice()).is_some() {
            return Err(MetricsError::UnexpectedGeneration(g.id.clone()));
        }
    }
    let mut out = Vec::with_capacity(triples.len());
    for t in triples {
        let g = by_id.remove(t.id.as_str()).ok_or_else(|| MetricsError::MissingGeneration(t.id.clone()))?;
        out.push((t, g));
    }
    if let Some(g) = generations.iter().find(|g| by_id.contains_key(g.id.as_str())) {
        return Err(MetricsError::UnexpectedGeneration(g.id.clone()));
    }
    Ok(out)
}

/// Macro-averaged content scores and corpus-level m-BLEU against the
/// exemplars, plus the per-instance scores in triple order.
pub fn evaluate_detailed(
    triples: &[TrainingTriple],
    generations: &[Generation],
    lexicon: &ContentLexicon,
) -> Result<(EvalReport, Vec<InstanceScores>), MetricsError> {
    if triples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let pairs = align(triples, generations)?;
    let instances: Vec<InstanceScores> = pairs
        .iter()
        .map(|(t, g)| InstanceScores {
            id: t.id.clone(),
            distance: t.distance,
            scores: content_fidelity(g, &t.x, &t.x_e, lexicon),
        })
        .collect();
    let cands: Vec<Vec<String>> = pairs.iter().map(|(_, g)| g.to_vec()).collect();
    let refs: Vec<Vec<String>> = pairs.iter().map(|(t, _)| t.y_e.clone()).collect();
    let n = instances.len() as f64;
    let mean = |f: fn(&ContentScores) -> f64| instances.iter().map(|i| f(&i.scores)).sum::<f64>() / n;
    let report = EvalReport {
        m_bleu: m_bleu(&cands, &refs, lexicon)?,
        incl_new: mean(|s| s.incl_new),
        excl_old: mean(|s| s.excl_old),
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        count: instances.len(),
    };
    Ok((report, instances))
}

pub fn evaluate(
    triples: &[TrainingTriple],
    generations: &[Generation],
    lexicon: &ContentLexicon,
) -> Result<EvalReport, MetricsError> {
    evaluate_detailed(triples, generations, lexicon).map(|(r, _)| r)
}

/// One report per exemplar distance.
pub fn evaluate_by_distance(
    triples: &[TrainingTriple],
    generations: &[Generation],
    lexicon: &ContentLexicon,
) -> Result<BTreeMap<usize, EvalReport>, MetricsError> {
    let mut groups: BTreeMap<usize, Vec<TrainingTriple>> = BTreeMap::new();
    for t in triples {
        groups.entry(t.distance).or_default().push(t.clone());
    }
    let wanted: HashMap<&str, usize> = triples.iter().map(|t| (t.id.as_str(), t.distance)).collect();
    let mut out = BTreeMap::new();
    for (d, ts) in groups {
        let gens: Vec<Generation> = generations
            .iter()
            .filter(|g| wanted.get(g.id.as_str()) == Some(&d))
            .cloned()
            .collect();
        out.insert(d, evaluate(&ts, &gens, lexicon)?);
    }
    Ok(out)
}

/// Plain-text table of scores by distance.
pub fn distance_table(rows: &BTreeMap<usize, EvalReport>) -> String {
    let mut s = String::from("distance  count  m_bleu  incl_new  excl_old  precision  recall\n");
    for (d, r) in rows {
        s.push_str(&format!(
            "{d:>8}  {:>5}  {:>6.2}  {:>8.2}  {:>8.2}  {:>9.2}  {:>6.2}\n",
            r.count, r.m_bleu, r.incl_new, r.excl_old, r.precision, r.recall
        ));
    }
    s
}
