use std::cmp::Ordering;

use super::{LstmState, Model, ModelError};
use crate::corpus::{Record, Vocabulary, BOS, EOS, UNK};
use crate::numeric::Real;

/// A decoded sequence and its summed log-probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<String>,
    pub score: f64,
    /// Whether the hypothesis ended with end-of-sequence.
    pub finished: bool,
}

struct Live<T> {
    ext: Vec<usize>,
    score: f64,
    state: LstmState<T>,
}

/// Reserved symbols other than end-of-sequence are never emitted.
fn emittable(ext: usize) -> bool {
    ext == EOS || !Vocabulary::is_reserved(ext)
}

fn input_id(last: Option<&usize>, vocab_len: usize) -> usize {
    match last {
        None => BOS,
        Some(&e) if e < vocab_len => e,
        // copied out-of-vocabulary value
        Some(_) => UNK,
    }
}

fn by_score_desc(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

impl<T: Real> Model<T> {
    /// Beam search over copy-aware token probabilities, scoring hypotheses by
    /// summed log-probability without length normalization.
    pub fn beam_search(&self, x: &Record, y_e: &[String], width: usize, max_len: usize) -> Result<Vec<String>, ModelError> {
        Ok(self.beam_search_scored(x, y_e, width, max_len)?.tokens)
    }

    pub fn beam_search_scored(
        &self,
        x: &Record,
        y_e: &[String],
        width: usize,
        max_len: usize,
    ) -> Result<Hypothesis, ModelError> {
        let width = width.max(1);
        let src = self.encode(x, y_e)?;
        let v = self.vocab.len();
        let mut live = vec![Live {
            ext: Vec::new(),
            score: 0.0,
            state: src.initial_state.clone(),
        }];
        let mut finished: Vec<(Vec<usize>, f64)> = Vec::new();

        for _ in 0..max_len {
            let mut cands: Vec<(f64, usize, usize)> = Vec::new();
            let mut next_states = Vec::with_capacity(live.len());
            for (hi, hyp) in live.iter().enumerate() {
                let tr = self.step_traced(&hyp.state, input_id(hyp.ext.last(), v), &src)?;
                let dist = self.extended_distribution(&tr.out, &src);
                let mut ids: Vec<usize> = (0..dist.len()).filter(|&e| emittable(e)).collect();
                ids.sort_by(|&a, &b| by_score_desc(dist[a].f64(), dist[b].f64()).then(a.cmp(&b)));
                ids.truncate(width);
                for e in ids {
                    cands.push((hyp.score + dist[e].f64().ln(), hi, e));
                }
                next_states.push(LstmState {
                    h: tr.lstm.h,
                    c: tr.lstm.c,
                });
            }
            cands.sort_by(|a, b| by_score_desc(a.0, b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

            let mut next = Vec::with_capacity(width);
            for (score, hi, e) in cands.into_iter().take(width) {
                let mut ext = live[hi].ext.clone();
                if e == EOS {
                    finished.push((ext, score));
                } else {
                    ext.push(e);
                    next.push(Live {
                        ext,
                        score,
                        state: next_states[hi].clone(),
                    });
                }
            }
            live = next;
            if live.is_empty() {
                break;
            }
            // log-probabilities are non-positive: no live hypothesis can overtake this
            let best_finished = finished.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
            let best_live = live.iter().map(|l| l.score).fold(f64::NEG_INFINITY, f64::max);
            if best_finished >= best_live {
                break;
            }
        }

        let pick = |items: Vec<(Vec<usize>, f64)>| {
            items
                .into_iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| a.1.total_cmp(&b.1).then(j.cmp(i)))
                .map(|(_, x)| x)
        };
        let (ext, score, done) = match pick(finished) {
            Some((ext, s)) => (ext, s, true),
            None => {
                let (ext, s) = pick(live.into_iter().map(|l| (l.ext, l.score)).collect()).expect("beam keeps a hypothesis");
                (ext, s, false)
            }
        };
        Ok(Hypothesis {
            tokens: ext.iter().map(|&e| self.extended_token(e, &src).to_string()).collect(),
            score,
            finished: done,
        })
    }

    /// Step-by-step argmax decoding (lowest extended id wins ties).
    pub fn greedy_decode(&self, x: &Record, y_e: &[String], max_len: usize) -> Result<Hypothesis, ModelError> {
        let src = self.encode(x, y_e)?;
        let v = self.vocab.len();
        let mut state = src.initial_state.clone();
        let mut ext: Vec<usize> = Vec::new();
        let mut score = 0.0;
        let mut done = false;
        for _ in 0..max_len {
            let tr = self.step_traced(&state, input_id(ext.last(), v), &src)?;
            let dist = self.extended_distribution(&tr.out, &src);
            let mut best = None::<usize>;
            for e in (0..dist.len()).filter(|&e| emittable(e)) {
                if best.is_none_or(|b| dist[e] > dist[b]) {
                    best = Some(e);
                }
            }
            let best = best.expect("vocabulary has emittable tokens");
            score += dist[best].f64().ln();
            state = LstmState {
                h: tr.lstm.h,
                c: tr.lstm.c,
            };
            if best == EOS {
                done = true;
                break;
            }
            ext.push(best);
        }
        Ok(Hypothesis {
            tokens: ext.iter().map(|&e| self.extended_token(e, &src).to_string()).collect(),
            score,
            finished: done,
        })
    }
}
