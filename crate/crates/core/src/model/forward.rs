use super::{DecoderStep, LstmState, Model, ModelError, Tensor};
use crate::corpus::{Record, BOS};
use crate::numeric::{dot, sigmoid, softmax_in_place, Real};

/// Activations of one LSTM step, kept for backpropagation.
#[derive(Clone, Debug)]
pub(crate) struct LstmTrace<T> {
    pub input: usize,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    /// Post-activation gates `[i; f; o; g]`.
    pub gates: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
    pub h: Vec<T>,
}

pub(crate) fn lstm_step<T: Real>(
    w_input: &Tensor<T>,
    w_recurrent: &Tensor<T>,
    bias: &Tensor<T>,
    x: &[T],
    input: usize,
    prev: &LstmState<T>,
) -> LstmTrace<T> {
    let h = prev.h.len();
    let mut z = bias.data().to_vec();
    w_input.matvec_acc(x, &mut z);
    w_recurrent.matvec_acc(&prev.h, &mut z);
    for (k, v) in z.iter_mut().enumerate() {
        *v = if k < 3 * h { sigmoid(*v) } else { v.tanh() };
    }
    let mut c = vec![T::zero(); h];
    let mut tanh_c = vec![T::zero(); h];
    let mut hs = vec![T::zero(); h];
    for k in 0..h {
        let (i, f, o, g) = (z[k], z[h + k], z[2 * h + k], z[3 * h + k]);
        c[k] = f * prev.c[k] + i * g;
        tanh_c[k] = c[k].tanh();
        hs[k] = o * tanh_c[k];
    }
    LstmTrace {
        input,
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        gates: z,
        c,
        tanh_c,
        h: hs,
    }
}

/// Encoder outputs the decoder attends to and copies from.
#[derive(Clone, Debug)]
pub struct EncodedSources<T> {
    /// One state per exemplar token.
    pub exemplar_states: Vec<Vec<T>>,
    /// One state per record entry, in record order.
    pub record_states: Vec<Vec<T>>,
    /// The copyable value token of each record entry.
    pub record_values: Vec<String>,
    /// Decoder start state: the last exemplar encoder state.
    pub initial_state: LstmState<T>,
    pub(crate) exemplar_keys: Vec<Vec<T>>,
    pub(crate) record_keys: Vec<Vec<T>>,
    /// Extended id of each record slot: its vocabulary id, or `V + k` for the
    /// k-th distinct out-of-vocabulary value.
    pub(crate) slot_ext_ids: Vec<usize>,
    pub(crate) oov_values: Vec<String>,
}

impl<T> EncodedSources<T> {
    pub fn out_of_vocab_values(&self) -> &[String] {
        &self.oov_values
    }
}

/// Everything the backward pass needs from the encoders.
#[derive(Clone, Debug)]
pub(crate) struct EncoderTrace<T> {
    pub field_ids: Vec<usize>,
    pub value_ids: Vec<usize>,
    pub exemplar_steps: Vec<LstmTrace<T>>,
}

/// One decoder step with its intermediate activations.
#[derive(Clone, Debug)]
pub(crate) struct StepTrace<T> {
    pub lstm: LstmTrace<T>,
    pub alpha: Vec<T>,
    pub context: Vec<T>,
    pub out: DecoderStep<T>,
}

impl<T: Real> Model<T> {
    fn hidden(&self) -> usize {
        self.params.dims.hidden_dim
    }

    /// One state per entry: `tanh(W [field_emb; value_emb] + b)`.
    pub fn encode_record(&self, x: &Record) -> Result<Vec<Vec<T>>, ModelError> {
        self.encode_record_ids(x).map(|(s, _, _)| s)
    }

    fn encode_record_ids(&self, x: &Record) -> Result<(Vec<Vec<T>>, Vec<usize>, Vec<usize>), ModelError> {
        if x.is_empty() {
            return Err(ModelError::EmptyRecord);
        }
        let p = &self.params;
        let d = p.dims.embed_dim;
        let mut states = Vec::with_capacity(x.len());
        let mut fields = Vec::with_capacity(x.len());
        let mut values = Vec::with_capacity(x.len());
        let mut z = vec![T::zero(); 2 * d];
        for e in x.entries() {
            let f = self.vocab.id_or_unk(&e.field);
            let v = self.vocab.id_or_unk(&e.value);
            z[..d].copy_from_slice(p.field_embedding.row(f));
            z[d..].copy_from_slice(p.token_embedding.row(v));
            let mut s = p.record_bias.data().to_vec();
            p.record_proj.matvec_acc(&z, &mut s);
            s.iter_mut().for_each(|a| *a = a.tanh());
            states.push(s);
            fields.push(f);
            values.push(v);
        }
        Ok((states, fields, values))
    }

    /// Left-to-right LSTM states, one per exemplar token.
    pub fn encode_exemplar(&self, y_e: &[String]) -> Result<Vec<Vec<T>>, ModelError> {
        Ok(self.encode_exemplar_traced(y_e)?.into_iter().map(|t| t.h).collect())
    }

    fn encode_exemplar_traced(&self, y_e: &[String]) -> Result<Vec<LstmTrace<T>>, ModelError> {
        if y_e.is_empty() {
            return Err(ModelError::EmptyExemplar);
        }
        let p = &self.params;
        let mut state = LstmState::zeros(self.hidden());
        let mut out = Vec::with_capacity(y_e.len());
        for tok in y_e {
            let id = self.vocab.id_or_unk(tok);
            let tr = lstm_step(&p.enc_input, &p.enc_recurrent, &p.enc_bias, p.token_embedding.row(id), id, &state);
            state = LstmState {
                h: tr.h.clone(),
                c: tr.c.clone(),
            };
            out.push(tr);
        }
        Ok(out)
    }

    /// Runs both encoders.
    pub fn encode(&self, x: &Record, y_e: &[String]) -> Result<EncodedSources<T>, ModelError> {
        self.encode_traced(x, y_e).map(|(s, _)| s)
    }

    pub(crate) fn encode_traced(
        &self,
        x: &Record,
        y_e: &[String],
    ) -> Result<(EncodedSources<T>, EncoderTrace<T>), ModelError> {
        let (record_states, field_ids, value_ids) = self.encode_record_ids(x)?;
        let exemplar_steps = self.encode_exemplar_traced(y_e)?;
        let p = &self.params;
        let last = exemplar_steps.last().expect("non-empty exemplar");
        let initial_state = LstmState {
            h: last.h.clone(),
            c: last.c.clone(),
        };
        let exemplar_states: Vec<Vec<T>> = exemplar_steps.iter().map(|t| t.h.clone()).collect();
        let exemplar_keys = exemplar_states.iter().map(|e| p.attn_exemplar.matvec(e)).collect();
        let record_keys = record_states.iter().map(|r| p.attn_record.matvec(r)).collect();

        let v = self.vocab.len();
        let record_values: Vec<String> = x.values().map(str::to_string).collect();
        let mut oov_values: Vec<String> = Vec::new();
        let slot_ext_ids = record_values
            .iter()
            .map(|val| match self.vocab.id(val) {
                Some(id) => id,
                None => match oov_values.iter().position(|o| o == val) {
                    Some(k) => v + k,
                    None => {
                        oov_values.push(val.clone());
                        v + oov_values.len() - 1
                    }
                },
            })
            .collect();
        Ok((
            EncodedSources {
                exemplar_states,
                record_states,
                record_values,
                initial_state,
                exemplar_keys,
                record_keys,
                slot_ext_ids,
                oov_values,
            },
            EncoderTrace {
                field_ids,
                value_ids,
                exemplar_steps,
            },
        ))
    }

    /// One decoder step: LSTM update, joint attention over exemplar and
    /// record states, then the vocabulary, copy and gate outputs.
    pub fn decode_step(
        &self,
        prev_state: &LstmState<T>,
        prev_token: &str,
        sources: &EncodedSources<T>,
    ) -> Result<(DecoderStep<T>, LstmState<T>), ModelError> {
        let input = if prev_token == crate::corpus::BOS_TOKEN {
            BOS
        } else {
            self.vocab.id_or_unk(prev_token)
        };
        let tr = self.step_traced(prev_state, input, sources)?;
        let next = LstmState {
            h: tr.lstm.h,
            c: tr.lstm.c,
        };
        Ok((tr.out, next))
    }

    pub(crate) fn step_traced(
        &self,
        prev: &LstmState<T>,
        input: usize,
        src: &EncodedSources<T>,
    ) -> Result<StepTrace<T>, ModelError> {
        let h = self.hidden();
        let check = |got: usize| {
            if got == h {
                Ok(())
            } else {
                Err(ModelError::DimensionMismatch { expected: h, got })
            }
        };
        check(prev.h.len())?;
        check(prev.c.len())?;
        if src.record_states.is_empty() {
            return Err(ModelError::EmptyRecord);
        }
        if src.exemplar_states.is_empty() {
            return Err(ModelError::EmptyExemplar);
        }
        for s in src.exemplar_states.iter().chain(&src.record_states) {
            check(s.len())?;
        }
        if input >= self.vocab.len() {
            return Err(ModelError::UnknownTokenId(input));
        }

        let p = &self.params;
        let lstm = lstm_step(&p.dec_input, &p.dec_recurrent, &p.dec_bias, p.token_embedding.row(input), input, prev);
        let s = &lstm.h;
        let n = src.exemplar_states.len();
        let mut alpha: Vec<T> = src
            .exemplar_keys
            .iter()
            .chain(&src.record_keys)
            .map(|k| dot(s, k))
            .collect();
        let mut p_copy = alpha[n..].to_vec();
        softmax_in_place(&mut alpha);
        softmax_in_place(&mut p_copy);

        let mut context = vec![T::zero(); h];
        for (a, state) in alpha.iter().zip(src.exemplar_states.iter().chain(&src.record_states)) {
            crate::numeric::axpy(*a, state, &mut context);
        }
        let mut cat = context.clone();
        cat.extend_from_slice(s);
        let mut hidden = p.combine_bias.data().to_vec();
        p.combine.matvec_acc(&cat, &mut hidden);
        hidden.iter_mut().for_each(|x| *x = x.tanh());

        let mut p_vocab = p.output_bias.data().to_vec();
        p.output.matvec_acc(&hidden, &mut p_vocab);
        softmax_in_place(&mut p_vocab);
        let gate = sigmoid(dot(p.gate_weight.data(), &hidden) + p.gate_bias.data()[0]);

        Ok(StepTrace {
            lstm,
            alpha,
            context,
            out: DecoderStep {
                hidden,
                gate,
                p_vocab,
                p_copy,
            },
        })
    }

    /// `g·P_V[token] + (1-g)·Σ P_x[j]` over record slots whose value is `token`.
    pub fn token_probability(&self, step: &DecoderStep<T>, sources: &EncodedSources<T>, token: &str) -> T {
        let pv = self.vocab.id(token).map_or(T::zero(), |i| step.p_vocab[i]);
        let copy: T = sources
            .record_values
            .iter()
            .zip(&step.p_copy)
            .filter(|(v, _)| *v == token)
            .map(|(_, p)| *p)
            .sum();
        step.gate * pv + (T::one() - step.gate) * copy
    }

    /// Output distribution over extended ids: the vocabulary followed by the
    /// record's out-of-vocabulary values.
    pub fn extended_distribution(&self, step: &DecoderStep<T>, sources: &EncodedSources<T>) -> Vec<T> {
        let g = step.gate;
        let mut out: Vec<T> = step.p_vocab.iter().map(|p| g * *p).collect();
        out.resize(self.vocab.len() + sources.oov_values.len(), T::zero());
        for (ext, p) in sources.slot_ext_ids.iter().zip(&step.p_copy) {
            out[*ext] += (T::one() - g) * *p;
        }
        out
    }

    /// Surface string for an extended id.
    pub fn extended_token<'a>(&'a self, ext: usize, sources: &'a EncodedSources<T>) -> &'a str {
        let v = self.vocab.len();
        if ext < v {
            self.vocab.token(ext).expect("id in range")
        } else {
            &sources.oov_values[ext - v]
        }
    }
}
