use serde::{Deserialize, Serialize};

use super::{CopyMass, CoverageMode, LossWeights, TrainError, TrainingTriple};
use crate::corpus::{Record, BOS, EOS, EOS_TOKEN};
use crate::model::{EncodedSources, EncoderTrace, LstmTrace, Model, ModelParams, StepTrace, Tensor};
use crate::numeric::{dot, Real};

/// Per-instance loss terms. `total` is always
/// `lambda * content_nll + (1 - lambda) * style_nll + eta * coverage`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub content_nll: f64,
    pub style_nll: f64,
    pub coverage: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn combine(content_nll: f64, style_nll: f64, coverage: f64, w: &LossWeights) -> Self {
        LossBreakdown {
            content_nll,
            style_nll,
            coverage,
            total: w.lambda * content_nll + (1.0 - w.lambda) * style_nll + w.eta * coverage,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.content_nll.is_finite() && self.style_nll.is_finite() && self.coverage.is_finite() && self.total.is_finite()
    }
}

/// Teacher-forced activations of one sequence.
pub(crate) struct SequenceTrace<T> {
    pub sources: EncodedSources<T>,
    pub encoder: EncoderTrace<T>,
    pub steps: Vec<StepTrace<T>>,
    /// Vocabulary id of each target (if any) and the record slots holding it.
    pub targets: Vec<(Option<usize>, Vec<usize>)>,
    pub probs: Vec<T>,
    pub nll: T,
}

impl<T: Real> SequenceTrace<T> {
    /// Per-slot copy mass summed over steps.
    pub fn copy_mass(&self, kind: CopyMass) -> Vec<T> {
        let m = self.sources.record_states.len();
        let mut agg = vec![T::zero(); m];
        for st in &self.steps {
            let scale = match kind {
                CopyMass::Distribution => T::one(),
                CopyMass::Gated => T::one() - st.out.gate,
            };
            for (a, p) in agg.iter_mut().zip(&st.out.p_copy) {
                *a += scale * *p;
            }
        }
        agg
    }

    pub fn coverage(&self, kind: CopyMass) -> T {
        coverage_of(&self.copy_mass(kind))
    }
}

fn coverage_of<T: Real>(agg: &[T]) -> T {
    agg.iter().map(|a| (*a - T::one()) * (*a - T::one())).sum()
}

/// `Σ_j (Σ_t p_copy[t][j] - 1)²` over the record slots.
pub fn coverage_penalty<T: Real>(copy_dists: &[Vec<T>]) -> T {
    let m = copy_dists.first().map_or(0, Vec::len);
    let mut agg = vec![T::zero(); m];
    for d in copy_dists {
        for (a, p) in agg.iter_mut().zip(d) {
            *a += *p;
        }
    }
    coverage_of(&agg)
}

/// Appends the end-of-sequence token when missing.
pub fn with_eos(tokens: &[String]) -> Vec<String> {
    let mut out = tokens.to_vec();
    if out.last().map(String::as_str) != Some(EOS_TOKEN) {
        out.push(EOS_TOKEN.to_string());
    }
    out
}

pub(crate) fn forward_sequence<T: Real>(
    model: &Model<T>,
    x: &Record,
    exemplar: &[String],
    target: &[String],
    floor: f64,
) -> Result<SequenceTrace<T>, TrainError> {
    if target.last().map(String::as_str) != Some(EOS_TOKEN) {
        return Err(TrainError::MissingEos);
    }
    let (sources, encoder) = model.encode_traced(x, exemplar)?;
    let floor = T::of(floor);
    let mut state = sources.initial_state.clone();
    let mut input = BOS;
    let mut steps = Vec::with_capacity(target.len());
    let mut targets = Vec::with_capacity(target.len());
    let mut probs = Vec::with_capacity(target.len());
    let mut nll = T::zero();
    for tok in target {
        let st = model.step_traced(&state, input, &sources)?;
        let vid = model.vocab.id(tok);
        let slots: Vec<usize> = sources
            .record_values
            .iter()
            .enumerate()
            .filter(|(_, v)| *v == tok)
            .map(|(j, _)| j)
            .collect();
        let g = st.out.gate;
        let pv = vid.map_or(T::zero(), |i| st.out.p_vocab[i]);
        let px: T = slots.iter().map(|&j| st.out.p_copy[j]).sum();
        let p = g * pv + (T::one() - g) * px;
        nll -= p.max(floor).ln();
        state = crate::model::LstmState {
            h: st.lstm.h.clone(),
            c: st.lstm.c.clone(),
        };
        // copied out-of-vocabulary values are fed back as the unknown token
        input = model.vocab.id_or_unk(tok);
        steps.push(st);
        targets.push((vid, slots));
        probs.push(p);
    }
    Ok(SequenceTrace {
        sources,
        encoder,
        steps,
        targets,
        probs,
        nll,
    })
}

/// Teacher-forced `-Σ_t log max(p_t, floor)` of `target`, which must end with
/// the end-of-sequence token, plus the per-step copy distributions.
pub fn sequence_nll<T: Real>(
    model: &Model<T>,
    x: &Record,
    exemplar: &[String],
    target: &[String],
    floor: f64,
) -> Result<(T, Vec<Vec<T>>), TrainError> {
    let tr = forward_sequence(model, x, exemplar, target, floor)?;
    Ok((tr.nll, tr.steps.into_iter().map(|s| s.out.p_copy).collect()))
}

/// Content pass `(x, y_e) -> y_x` and style pass `(x_e, y_e) -> y_e`.
pub(crate) fn forward_triple<T: Real>(
    model: &Model<T>,
    t: &TrainingTriple,
    w: &LossWeights,
) -> Result<(SequenceTrace<T>, SequenceTrace<T>, LossBreakdown), TrainError> {
    let content = forward_sequence(model, &t.x, &t.y_e, &with_eos(&t.y_x), w.prob_floor)?;
    let style = forward_sequence(model, &t.x_e, &t.y_e, &with_eos(&t.y_e), w.prob_floor)?;
    let cov = match w.coverage {
        CoverageMode::Both => 0.5 * (content.coverage(w.copy_mass).f64() + style.coverage(w.copy_mass).f64()),
        CoverageMode::Content => content.coverage(w.copy_mass).f64(),
        CoverageMode::Style => style.coverage(w.copy_mass).f64(),
    };
    let b = LossBreakdown::combine(content.nll.f64(), style.nll.f64(), cov, w);
    Ok((content, style, b))
}

/// The objective split into per-step likelihood terms and per-slot
/// coverage terms; they sum to `total`.
pub fn loss_terms<T: Real>(model: &Model<T>, t: &TrainingTriple, w: &LossWeights) -> Result<Vec<f64>, TrainError> {
    let (content, style, _) = forward_triple(model, t, w)?;
    let (cov_c, cov_s) = coverage_weights(w);
    let mut terms = Vec::new();
    for (tr, nll_w, cov_w) in [(&content, w.lambda, cov_c), (&style, 1.0 - w.lambda, cov_s)] {
        terms.extend(tr.probs.iter().map(|p| -nll_w * p.f64().max(w.prob_floor).ln()));
        terms.extend(tr.copy_mass(w.copy_mass).iter().map(|a| cov_w * (a.f64() - 1.0).powi(2)));
    }
    Ok(terms)
}

fn coverage_weights(w: &LossWeights) -> (f64, f64) {
    match w.coverage {
        CoverageMode::Both => (0.5 * w.eta, 0.5 * w.eta),
        CoverageMode::Content => (w.eta, 0.0),
        CoverageMode::Style => (0.0, w.eta),
    }
}

pub fn total_loss<T: Real>(model: &Model<T>, t: &TrainingTriple, w: &LossWeights) -> Result<LossBreakdown, TrainError> {
    forward_triple(model, t, w).map(|(_, _, b)| b)
}

/// Loss terms and the gradient of `total` with respect to every parameter.
pub fn gradients<T: Real>(
    model: &Model<T>,
    t: &TrainingTriple,
    w: &LossWeights,
) -> Result<(LossBreakdown, ModelParams<T>), TrainError> {
    let (content, style, b) = forward_triple(model, t, w)?;
    let (cov_c, cov_s) = coverage_weights(w);
    let mut grads = model.params.zeros_like();
    let floor = T::of(w.prob_floor);
    if w.lambda != 0.0 || cov_c != 0.0 {
        backward(model, &content, T::of(w.lambda), T::of(cov_c), w.copy_mass, floor, &mut grads);
    }
    if w.lambda != 1.0 || cov_s != 0.0 {
        backward(model, &style, T::of(1.0 - w.lambda), T::of(cov_s), w.copy_mass, floor, &mut grads);
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(TrainError::NonFiniteGradient(name));
    }
    Ok((b, grads))
}

/// Backpropagates one LSTM step. Returns gradients for `(h_prev, c_prev)`.
#[allow(clippy::too_many_arguments)]
fn lstm_backward<T: Real>(
    tr: &LstmTrace<T>,
    dh: &[T],
    dc: &[T],
    x: &[T],
    w_input: &Tensor<T>,
    w_recurrent: &Tensor<T>,
    g_input: &mut Tensor<T>,
    g_recurrent: &mut Tensor<T>,
    g_bias: &mut Tensor<T>,
    dx: &mut [T],
) -> (Vec<T>, Vec<T>) {
    let h = dh.len();
    let one = T::one();
    let mut dz = vec![T::zero(); 4 * h];
    let mut dc_prev = vec![T::zero(); h];
    for k in 0..h {
        let (i, f, o, g) = (tr.gates[k], tr.gates[h + k], tr.gates[2 * h + k], tr.gates[3 * h + k]);
        let tc = tr.tanh_c[k];
        let d_o = dh[k] * tc;
        let dct = dc[k] + dh[k] * o * (one - tc * tc);
        let di = dct * g;
        let dg = dct * i;
        let df = dct * tr.c_prev[k];
        dc_prev[k] = dct * f;
        dz[k] = di * i * (one - i);
        dz[h + k] = df * f * (one - f);
        dz[2 * h + k] = d_o * o * (one - o);
        dz[3 * h + k] = dg * (one - g * g);
    }
    g_input.add_outer(&dz, x);
    g_recurrent.add_outer(&dz, &tr.h_prev);
    for (b, d) in g_bias.data_mut().iter_mut().zip(&dz) {
        *b += *d;
    }
    w_input.matvec_t_acc(&dz, dx);
    let mut dh_prev = vec![T::zero(); h];
    w_recurrent.matvec_t_acc(&dz, &mut dh_prev);
    (dh_prev, dc_prev)
}

fn accumulate<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

/// Adds the gradient of `nll_weight * nll + cov_weight * coverage` for one
/// traced sequence into `g`.
pub(crate) fn backward<T: Real>(
    model: &Model<T>,
    tr: &SequenceTrace<T>,
    nll_weight: T,
    cov_weight: T,
    copy_mass: CopyMass,
    floor: T,
    g: &mut ModelParams<T>,
) {
    let p = &model.params;
    let h = p.dims.hidden_dim;
    let d = p.dims.embed_dim;
    let one = T::one();
    let two = T::of(2.0);
    let src = &tr.sources;
    let n = src.exemplar_states.len();
    let m = src.record_states.len();

    let mut d_ex = vec![vec![T::zero(); h]; n];
    let mut d_rec = vec![vec![T::zero(); h]; m];
    let mut dk_ex = vec![vec![T::zero(); h]; n];
    let mut dk_rec = vec![vec![T::zero(); h]; m];
    let dcov: Vec<T> = tr.copy_mass(copy_mass).iter().map(|a| cov_weight * two * (*a - one)).collect();

    let mut dh_next = vec![T::zero(); h];
    let mut dc_next = vec![T::zero(); h];
    let mut dlogits = vec![T::zero(); p.dims.vocab_size];
    let mut dx = vec![T::zero(); d];

    for t in (0..tr.steps.len()).rev() {
        let st = &tr.steps[t];
        let out = &st.out;
        let (vid, slots) = &tr.targets[t];
        let prob = tr.probs[t];
        let gate = out.gate;
        let dp = if prob >= floor && prob > T::zero() { -nll_weight / prob } else { T::zero() };

        let pv_y = vid.map_or(T::zero(), |i| out.p_vocab[i]);
        let px_y: T = slots.iter().map(|&j| out.p_copy[j]).sum();
        let mut dgate = dp * (pv_y - px_y);

        // copy distribution: softmax over the record scores
        let mut dpx = dcov.clone();
        if copy_mass == CopyMass::Gated {
            dgate -= out.p_copy.iter().zip(&dcov).map(|(a, b)| *a * *b).sum::<T>();
            dpx.iter_mut().for_each(|v| *v *= one - gate);
        }
        for &j in slots {
            dpx[j] += (one - gate) * dp;
        }
        let s_px: T = out.p_copy.iter().zip(&dpx).map(|(a, b)| *a * *b).sum();
        let da_copy: Vec<T> = out.p_copy.iter().zip(&dpx).map(|(a, b)| *a * (*b - s_px)).collect();

        // gate
        let dz_gate = dgate * gate * (one - gate);
        let mut dhid: Vec<T> = p.gate_weight.data().iter().map(|w| *w * dz_gate).collect();
        for (gw, x) in g.gate_weight.data_mut().iter_mut().zip(&out.hidden) {
            *gw += dz_gate * *x;
        }
        g.gate_bias.data_mut()[0] += dz_gate;

        // vocabulary softmax
        if let (Some(y), true) = (vid, dp != T::zero()) {
            let c = gate * dp * pv_y;
            for (dl, pk) in dlogits.iter_mut().zip(&out.p_vocab) {
                *dl = -c * *pk;
            }
            dlogits[*y] += c;
            g.output.add_outer(&dlogits, &out.hidden);
            accumulate(g.output_bias.data_mut(), &dlogits);
            p.output.matvec_t_acc(&dlogits, &mut dhid);
        }

        // combination layer
        let dpre: Vec<T> = dhid.iter().zip(&out.hidden).map(|(dh, y)| *dh * (one - *y * *y)).collect();
        let mut cat = st.context.clone();
        cat.extend_from_slice(&st.lstm.h);
        g.combine.add_outer(&dpre, &cat);
        accumulate(g.combine_bias.data_mut(), &dpre);
        let mut dcat = vec![T::zero(); 2 * h];
        p.combine.matvec_t_acc(&dpre, &mut dcat);
        let dctx = &dcat[..h];
        let mut ds = dh_next.clone();
        accumulate(&mut ds, &dcat[h..]);

        // joint attention
        let states = src.exemplar_states.iter().chain(&src.record_states);
        let dalpha: Vec<T> = states.map(|s| dot(dctx, s)).collect();
        for i in 0..n + m {
            let a = st.alpha[i];
            let dst = if i < n { &mut d_ex[i] } else { &mut d_rec[i - n] };
            crate::numeric::axpy(a, dctx, dst);
        }
        let s_alpha: T = st.alpha.iter().zip(&dalpha).map(|(a, b)| *a * *b).sum();
        let s = &st.lstm.h;
        for i in 0..n + m {
            let mut da = st.alpha[i] * (dalpha[i] - s_alpha);
            let key = if i < n {
                &src.exemplar_keys[i]
            } else {
                da += da_copy[i - n];
                &src.record_keys[i - n]
            };
            crate::numeric::axpy(da, key, &mut ds);
            let dk = if i < n { &mut dk_ex[i] } else { &mut dk_rec[i - n] };
            crate::numeric::axpy(da, s, dk);
        }

        // decoder LSTM
        dx.iter_mut().for_each(|v| *v = T::zero());
        let (dh_prev, dc_prev) = lstm_backward(
            &st.lstm,
            &ds,
            &dc_next,
            p.token_embedding.row(st.lstm.input),
            &p.dec_input,
            &p.dec_recurrent,
            &mut g.dec_input,
            &mut g.dec_recurrent,
            &mut g.dec_bias,
            &mut dx,
        );
        accumulate(g.token_embedding.row_mut(st.lstm.input), &dx);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    // attention keys
    for i in 0..n {
        g.attn_exemplar.add_outer(&dk_ex[i], &src.exemplar_states[i]);
        p.attn_exemplar.matvec_t_acc(&dk_ex[i], &mut d_ex[i]);
    }
    for j in 0..m {
        g.attn_record.add_outer(&dk_rec[j], &src.record_states[j]);
        p.attn_record.matvec_t_acc(&dk_rec[j], &mut d_rec[j]);
    }

    // exemplar encoder; the decoder started from its final state
    accumulate(&mut d_ex[n - 1], &dh_next);
    let mut dc = dc_next;
    let mut dh_carry = vec![T::zero(); h];
    for i in (0..n).rev() {
        let step = &tr.encoder.exemplar_steps[i];
        let mut dh = d_ex[i].clone();
        accumulate(&mut dh, &dh_carry);
        dx.iter_mut().for_each(|v| *v = T::zero());
        let (dh_prev, dc_prev) = lstm_backward(
            step,
            &dh,
            &dc,
            p.token_embedding.row(step.input),
            &p.enc_input,
            &p.enc_recurrent,
            &mut g.enc_input,
            &mut g.enc_recurrent,
            &mut g.enc_bias,
            &mut dx,
        );
        accumulate(g.token_embedding.row_mut(step.input), &dx);
        dh_carry = dh_prev;
        dc = dc_prev;
    }

    // record encoder
    let mut z = vec![T::zero(); 2 * d];
    for j in 0..m {
        let (f, v) = (tr.encoder.field_ids[j], tr.encoder.value_ids[j]);
        let dpre: Vec<T> = d_rec[j]
            .iter()
            .zip(&src.record_states[j])
            .map(|(dr, r)| *dr * (one - *r * *r))
            .collect();
        z[..d].copy_from_slice(p.field_embedding.row(f));
        z[d..].copy_from_slice(p.token_embedding.row(v));
        g.record_proj.add_outer(&dpre, &z);
        accumulate(g.record_bias.data_mut(), &dpre);
        let mut dz = vec![T::zero(); 2 * d];
        p.record_proj.matvec_t_acc(&dpre, &mut dz);
        accumulate(g.field_embedding.row_mut(f), &dz[..d]);
        accumulate(g.token_embedding.row_mut(v), &dz[d..]);
    }
}

/// Fraction of teacher-forced steps where the argmax of the output
/// distribution is the target token. Returns `(correct, steps)`.
pub fn teacher_forced_accuracy<T: Real>(
    model: &Model<T>,
    x: &Record,
    exemplar: &[String],
    target: &[String],
) -> Result<(usize, usize), TrainError> {
    let target = with_eos(target);
    let tr = forward_sequence(model, x, exemplar, &target, super::DEFAULT_PROB_FLOOR)?;
    let mut correct = 0;
    for (st, tok) in tr.steps.iter().zip(&target) {
        let dist = model.extended_distribution(&st.out, &tr.sources);
        let mut best = None::<usize>;
        for e in 0..dist.len() {
            if (e == EOS || !crate::corpus::Vocabulary::is_reserved(e)) && best.is_none_or(|b| dist[e] > dist[b]) {
                best = Some(e);
            }
        }
        if let Some(b) = best {
            if model.extended_token(b, &tr.sources) == tok {
                correct += 1;
            }
        }
    }
    Ok((correct, target.len()))
}
