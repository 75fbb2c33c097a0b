use rayon::prelude::*;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{gradients, Adam, LossBreakdown, Phase, TrainConfig, TrainError, TrainingTriple};
use crate::corpus::{CorpusPair, Vocabulary};
use crate::model::Model;
use crate::numeric::Real;
use crate::retrieval::{ExemplarIndex, RetrievalConfig, RetrievalError};
use crate::seed;

/// Mean per-instance losses of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based, counted across both phases.
    pub epoch: usize,
    pub phase: Phase,
    pub content_nll: f64,
    pub style_nll: f64,
    pub coverage: f64,
    pub total: f64,
}

/// Vocabulary over the training corpus and the exemplar pool.
pub fn build_vocab(corpus: &[CorpusPair], pool: &[CorpusPair], min_count: usize) -> Result<Vocabulary, TrainError> {
    let mut all = corpus.to_vec();
    all.extend_from_slice(pool);
    Ok(Vocabulary::build(&all, min_count)?)
}

/// Pairs every query with an exemplar drawn under `seed`. Queries without
/// an exemplar in range are skipped.
pub fn retrieve_triples(
    corpus: &[CorpusPair],
    index: &ExemplarIndex<'_>,
    config: &RetrievalConfig,
    seed: u64,
) -> Result<Vec<TrainingTriple>, TrainError> {
    let mut out = Vec::with_capacity(corpus.len());
    for q in corpus {
        match index.retrieve(&q.id, &q.record, config, seed) {
            Ok(hit) => out.push(TrainingTriple::from_pairs(q, hit.pair)),
            Err(RetrievalError::NoExemplar { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Initializes a model for `corpus` and trains it.
pub fn train<T: Real>(
    corpus: &[CorpusPair],
    pool: &[CorpusPair],
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog, &Model<T>),
) -> Result<(Model<T>, Vec<EpochLog>), TrainError> {
    config.validate()?;
    let vocab = build_vocab(corpus, pool, config.min_count)?;
    let model = Model::init(vocab, config.embed_dim, config.hidden_dim, seed::derive(config.seed, "init", 0));
    train_model(model, corpus, pool, config, on_epoch)
}

/// Two-phase training: style-only pretraining, then the joint objective.
/// Exemplars are re-drawn every epoch unless `frozen_triples` is set.
///
/// A non-finite loss or gradient aborts with the parameters as they were at
/// the start of the failing epoch.
pub fn train_model<T: Real>(
    mut model: Model<T>,
    corpus: &[CorpusPair],
    pool: &[CorpusPair],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog, &Model<T>),
) -> Result<(Model<T>, Vec<EpochLog>), TrainError> {
    config.validate()?;
    let index = ExemplarIndex::new(pool)?;
    let rcfg = RetrievalConfig {
        max_distance: config.max_distance,
        prefer_equal_size: config.prefer_equal_size,
    };
    let mut adam = Adam::new(&model.params);
    let mut log = Vec::with_capacity(config.total_epochs());
    let mut frozen: Option<Vec<TrainingTriple>> = None;

    for epoch in 0..config.total_epochs() {
        let phase = config.phase_of_epoch(epoch);
        let weights = config.weights(phase);
        let triples = match (&frozen, config.frozen_triples) {
            (Some(t), true) => t.clone(),
            _ => {
                let draw = if config.frozen_triples { 0 } else { epoch as u64 };
                let t = retrieve_triples(corpus, &index, &rcfg, seed::derive(config.seed, "retrieval", draw))?;
                if config.frozen_triples {
                    frozen = Some(t.clone());
                }
                t
            }
        };
        if triples.is_empty() {
            return Err(TrainError::NoTriples);
        }
        let mut order: Vec<usize> = (0..triples.len()).collect();
        order.shuffle(&mut seed::rng(config.seed, "shuffle", epoch as u64));

        let snapshot = model.params.cast::<f64>();
        let diverged = |reason: String| TrainError::Diverged {
            epoch: epoch + 1,
            reason,
            last_good: Box::new(snapshot.clone()),
        };
        let mut sum = LossBreakdown::default();
        for batch in order.chunks(config.batch_size) {
            let results: Vec<Result<(LossBreakdown, _), TrainError>> =
                batch.par_iter().map(|&i| gradients(&model, &triples[i], &weights)).collect();
            let mut grads = model.params.zeros_like();
            for r in results {
                let (b, g) = match r {
                    Ok(v) => v,
                    Err(TrainError::NonFiniteGradient(name)) => {
                        return Err(diverged(format!("non-finite gradient in {name}")))
                    }
                    Err(e) => return Err(e),
                };
                if !b.is_finite() {
                    return Err(diverged("non-finite loss".into()));
                }
                sum.content_nll += b.content_nll;
                sum.style_nll += b.style_nll;
                sum.coverage += b.coverage;
                sum.total += b.total;
                grads.add_scaled(T::one(), &g);
            }
            grads.scale(T::one() / T::of(batch.len() as f64));
            adam.step(&mut model.params, &grads, config.learning_rate);
            if let Some(name) = model.params.first_non_finite() {
                return Err(diverged(format!("non-finite parameter in {name}")));
            }
        }
        let n = triples.len() as f64;
        let entry = EpochLog {
            epoch: epoch + 1,
            phase,
            content_nll: sum.content_nll / n,
            style_nll: sum.style_nll / n,
            coverage: sum.coverage / n,
            total: sum.total / n,
        };
        on_epoch(&entry, &model);
        log.push(entry);
    }
    Ok((model, log))
}
