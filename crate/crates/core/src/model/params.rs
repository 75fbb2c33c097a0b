use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::numeric::Real;

/// Model sizes: vocabulary `V`, embedding `d`, hidden `h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

macro_rules! model_tensors {
    ($( $(#[$doc:meta])* $name:ident : ($rows:expr, $cols:expr) ),* $(,)?) => {
        /// Every learnable tensor of the encoder-decoder.
        ///
        /// The same struct doubles as the gradient container and as Adam's
        /// moment buffers.
        #[derive(Clone, Debug, PartialEq)]
        pub struct ModelParams<T> {
            pub dims: ModelDims,
            $( $(#[$doc])* pub $name: Tensor<T>, )*
        }

        impl<T: Real> ModelParams<T> {
            pub const TENSOR_NAMES: &'static [&'static str] = &[$(stringify!($name)),*];

            pub fn zeros(dims: ModelDims) -> Self {
                #[allow(unused_variables)]
                let ModelDims { vocab_size: v, embed_dim: d, hidden_dim: h } = dims;
                ModelParams {
                    dims,
                    $( $name: Tensor::zeros($rows(v, d, h), $cols(v, d, h)), )*
                }
            }

            pub fn tensors(&self) -> Vec<(&'static str, &Tensor<T>)> {
                vec![$((stringify!($name), &self.$name)),*]
            }

            pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
                vec![$((stringify!($name), &mut self.$name)),*]
            }
        }
    };
}

model_tensors! {
    /// `V × d`, also used for exemplar and decoder inputs.
    token_embedding: (|v, _, _| v, |_, d, _| d),
    /// `V × d`, indexed by the vocabulary id of the field name.
    field_embedding: (|v, _, _| v, |_, d, _| d),
    /// `h × 2d` projection of `[field; value]` embeddings.
    record_proj: (|_, _, h| h, |_, d, _| 2 * d),
    record_bias: (|_, _, h| h, |_, _, _| 1),
    /// Exemplar LSTM, gate blocks ordered input, forget, output, candidate.
    enc_input: (|_, _, h| 4 * h, |_, d, _| d),
    enc_recurrent: (|_, _, h| 4 * h, |_, _, h| h),
    enc_bias: (|_, _, h| 4 * h, |_, _, _| 1),
    dec_input: (|_, _, h| 4 * h, |_, d, _| d),
    dec_recurrent: (|_, _, h| 4 * h, |_, _, h| h),
    dec_bias: (|_, _, h| 4 * h, |_, _, _| 1),
    /// Multiplicative attention scores `sᵀ W e` against exemplar states.
    attn_exemplar: (|_, _, h| h, |_, _, h| h),
    /// Same for record states.
    attn_record: (|_, _, h| h, |_, _, h| h),
    /// `h × 2h` map of `[context; decoder state]` to the attentional hidden state.
    combine: (|_, _, h| h, |_, _, h| 2 * h),
    combine_bias: (|_, _, h| h, |_, _, _| 1),
    /// Copy gate `g = σ(w·h̃ + b)`.
    gate_weight: (|_, _, _| 1, |_, _, h| h),
    gate_bias: (|_, _, _| 1, |_, _, _| 1),
    output: (|v, _, _| v, |_, _, h| h),
    output_bias: (|v, _, _| v, |_, _, _| 1),
}

impl<T: Real> ModelParams<T> {
    /// Uniform `±1/√fan_in` weights, `±0.1` embeddings, zero biases except a
    /// forget-gate bias of one.
    pub fn init(dims: ModelDims, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(dims);
        let h = dims.hidden_dim;
        for (name, t) in p.tensors_mut() {
            let scale = match name {
                "token_embedding" | "field_embedding" => 0.1,
                n if n.ends_with("bias") => 0.0,
                _ => 1.0 / (t.cols() as f64).sqrt(),
            };
            if scale > 0.0 {
                for x in t.data_mut() {
                    *x = T::of(rng.gen_range(-scale..scale));
                }
            }
        }
        for b in [&mut p.enc_bias, &mut p.dec_bias] {
            for x in &mut b.data_mut()[h..2 * h] {
                *x = T::one();
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.tensors().into_iter().find(|(_, t)| !t.all_finite()).map(|(n, _)| n)
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: T, other: &Self) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_scaled(alpha, b);
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for (_, t) in self.tensors_mut() {
            for x in t.data_mut() {
                *x *= alpha;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(self.dims);
        for ((_, dst), (_, src)) in out.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.cast();
        }
        out
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors().into_iter().find(|(n, _)| *n == name).map(|(_, t)| t)
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors_mut().into_iter().find(|(n, _)| *n == name).map(|(_, t)| t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn shapes_are_consistent() {
        let dims = ModelDims { vocab_size: 11, embed_dim: 3, hidden_dim: 5 };
        let p = ModelParams::<f64>::init(dims, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.record_proj.shape(), (5, 6));
        assert_eq!(p.enc_recurrent.shape(), (20, 5));
        assert_eq!(p.combine.shape(), (5, 10));
        assert_eq!(p.output.shape(), (11, 5));
        assert_eq!(p.tensors().len(), ModelParams::<f64>::TENSOR_NAMES.len());
        assert!(p.first_non_finite().is_none());
        assert_eq!(p.dec_bias.data()[5], 1.0);
        let back: ModelParams<f64> = p.cast::<f32>().cast();
        assert_eq!(back.dims, p.dims);
    }
}
