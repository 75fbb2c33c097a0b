//! Exemplar retrieval by field-set distance.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusPair, Record};
use crate::seed;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("retrieval pool is empty")]
    EmptyPool,
    #[error("no exemplar within distance {max_distance} for {id:?}")]
    NoExemplar { id: String, max_distance: usize },
    #[error("unknown pair id {0:?}")]
    UnknownId(String),
    #[error("triple {id}: stored distance {stored} but records are {actual} apart")]
    DistanceMismatch { id: String, stored: usize, actual: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The set of field names of a record.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldSet(BTreeSet<String>);

impl FieldSet {
    pub fn of(record: &Record) -> Self {
        FieldSet(record.fields().map(str::to_string).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Size of the symmetric difference.
    pub fn distance(&self, other: &FieldSet) -> usize {
        self.0.symmetric_difference(&other.0).count()
    }
}

/// `|T(x) ∪ T(x_e)| - |T(x) ∩ T(x_e)|` over field names.
pub fn field_set_distance(x: &Record, x_e: &Record) -> usize {
    let a = x.field_set();
    let b = x_e.field_set();
    a.union(&b).count() - a.intersection(&b).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetrievalConfig {
    pub max_distance: usize,
    /// Among in-range candidates, keep only those with the query's field
    /// count whenever any exist.
    pub prefer_equal_size: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            max_distance: 5,
            prefer_equal_size: true,
        }
    }
}

/// Pool grouped by field set, so candidate search scales with the number of
/// distinct field sets rather than the pool size.
pub struct ExemplarIndex<'a> {
    pool: &'a [CorpusPair],
    groups: BTreeMap<FieldSet, Vec<usize>>,
}

impl<'a> ExemplarIndex<'a> {
    pub fn new(pool: &'a [CorpusPair]) -> Result<Self, RetrievalError> {
        if pool.is_empty() {
            return Err(RetrievalError::EmptyPool);
        }
        let mut groups: BTreeMap<FieldSet, Vec<usize>> = BTreeMap::new();
        for (i, p) in pool.iter().enumerate() {
            groups.entry(FieldSet::of(&p.record)).or_default().push(i);
        }
        Ok(ExemplarIndex { pool, groups })
    }

    pub fn pool(&self) -> &'a [CorpusPair] {
        self.pool
    }

    /// Pool indices eligible as exemplars for `(query_id, record)`, ascending.
    pub fn candidates(&self, query_id: &str, record: &Record, config: &RetrievalConfig) -> Vec<usize> {
        let query = FieldSet::of(record);
        let in_range: Vec<(&FieldSet, &Vec<usize>)> = self
            .groups
            .iter()
            .filter(|(fs, _)| fs.distance(&query) <= config.max_distance)
            .collect();
        let has_equal = config.prefer_equal_size
            && in_range.iter().any(|(fs, idx)| {
                fs.len() == query.len() && idx.iter().any(|&i| self.pool[i].id != query_id)
            });
        let mut out: Vec<usize> = in_range
            .into_iter()
            .filter(|(fs, _)| !has_equal || fs.len() == query.len())
            .flat_map(|(_, idx)| idx.iter().copied())
            .filter(|&i| self.pool[i].id != query_id)
            .collect();
        out.sort_unstable();
        out
    }

    /// Uniform choice among [`Self::candidates`]; the draw depends only on
    /// `seed` and the query id.
    pub fn retrieve(
        &self,
        query_id: &str,
        record: &Record,
        config: &RetrievalConfig,
        seed: u64,
    ) -> Result<Retrieved<'a>, RetrievalError> {
        let cands = self.candidates(query_id, record, config);
        if cands.is_empty() {
            return Err(RetrievalError::NoExemplar {
                id: query_id.to_string(),
                max_distance: config.max_distance,
            });
        }
        let mut rng = seed::rng(seed, query_id, 0);
        let pair = &self.pool[cands[rng.gen_range(0..cands.len())]];
        Ok(Retrieved {
            pair,
            distance: field_set_distance(record, &pair.record),
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Retrieved<'a> {
    pub pair: &'a CorpusPair,
    pub distance: usize,
}

/// Retrieves an exemplar `(x_e, y_e)` for `query` from `pool`.
pub fn retrieve_exemplar(
    query: &CorpusPair,
    pool: &[CorpusPair],
    max_distance: usize,
    prefer_equal_size: bool,
    seed: u64,
) -> Result<(Record, Vec<String>), RetrievalError> {
    let config = RetrievalConfig {
        max_distance,
        prefer_equal_size,
    };
    let hit = ExemplarIndex::new(pool)?.retrieve(&query.id, &query.record, &config, seed)?;
    Ok((hit.pair.record.clone(), hit.pair.text.clone()))
}

/// A query paired with its exemplar, by id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRef {
    pub id: String,
    pub exemplar_id: String,
    pub distance: usize,
}

/// Retrieves one exemplar per query.
pub fn build_triple_refs(
    queries: &[CorpusPair],
    pool: &[CorpusPair],
    config: &RetrievalConfig,
    seed: u64,
) -> Result<Vec<TripleRef>, RetrievalError> {
    let index = ExemplarIndex::new(pool)?;
    queries
        .iter()
        .map(|q| {
            let hit = index.retrieve(&q.id, &q.record, config, seed)?;
            Ok(TripleRef {
                id: q.id.clone(),
                exemplar_id: hit.pair.id.clone(),
                distance: hit.distance,
            })
        })
        .collect()
}

pub fn save_triple_refs(path: impl AsRef<Path>, refs: &[TripleRef]) -> Result<(), RetrievalError> {
    let mut buf = Vec::new();
    for r in refs {
        writeln!(buf, "{}", serde_json::to_string(r).expect("triple serializes"))?;
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_triple_refs(path: impl AsRef<Path>) -> Result<Vec<TripleRef>, RetrievalError> {
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RetrievalError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
