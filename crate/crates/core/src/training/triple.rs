use std::collections::HashMap;

use crate::corpus::{CorpusPair, Record};
use crate::retrieval::{field_set_distance, RetrievalError, TripleRef};

/// A training instance: the query pair and a retrieved exemplar pair.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingTriple {
    pub id: String,
    pub exemplar_id: String,
    pub x: Record,
    pub y_x: Vec<String>,
    pub x_e: Record,
    pub y_e: Vec<String>,
    /// Field-set distance between `x` and `x_e`.
    pub distance: usize,
}

impl TrainingTriple {
    pub fn from_pairs(query: &CorpusPair, exemplar: &CorpusPair) -> Self {
        TrainingTriple {
            id: query.id.clone(),
            exemplar_id: exemplar.id.clone(),
            x: query.record.clone(),
            y_x: query.text.clone(),
            x_e: exemplar.record.clone(),
            y_e: exemplar.text.clone(),
            distance: field_set_distance(&query.record, &exemplar.record),
        }
    }
}

/// Resolves id references against the query corpus and the exemplar pool.
pub fn resolve_triples(
    refs: &[TripleRef],
    corpus: &[CorpusPair],
    pool: &[CorpusPair],
) -> Result<Vec<TrainingTriple>, RetrievalError> {
    let by_id = |pairs: &[CorpusPair]| -> HashMap<String, usize> {
        pairs.iter().enumerate().map(|(i, p)| (p.id.clone(), i)).collect()
    };
    let queries = by_id(corpus);
    let exemplars = by_id(pool);
    refs.iter()
        .map(|r| {
            let q = queries.get(&r.id).ok_or_else(|| RetrievalError::UnknownId(r.id.clone()))?;
            let e = exemplars
                .get(&r.exemplar_id)
                .ok_or_else(|| RetrievalError::UnknownId(r.exemplar_id.clone()))?;
            let t = TrainingTriple::from_pairs(&corpus[*q], &pool[*e]);
            if t.distance != r.distance {
                return Err(RetrievalError::DistanceMismatch {
                    id: r.id.clone(),
                    stored: r.distance,
                    actual: t.distance,
                });
            }
            Ok(t)
        })
        .collect()
}
