//! Hybrid attention-copy encoder-decoder.
//!
//! A per-entry record encoder and an LSTM exemplar encoder feed one LSTM
//! decoder. At every step the decoder attends jointly over both sets of
//! encoder states, then mixes a vocabulary distribution with a copy
//! distribution over record values through a scalar gate.

mod beam;
mod checkpoint;
mod forward;
mod params;
mod tensor;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use beam::Hypothesis;
pub use checkpoint::{decode_checkpoint, encode_checkpoint, vocab_path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use forward::EncodedSources;
pub(crate) use forward::{EncoderTrace, LstmTrace, StepTrace};
pub use params::{ModelDims, ModelParams};
pub use tensor::Tensor;

use crate::corpus::Vocabulary;
use crate::numeric::Real;

pub const DEFAULT_EMBED_DIM: usize = 32;
pub const DEFAULT_HIDDEN_DIM: usize = 64;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("record has no entries")]
    EmptyRecord,
    #[error("exemplar has no tokens")]
    EmptyExemplar,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("token id {0} is outside the vocabulary")]
    UnknownTokenId(usize),
    #[error("checkpoint vocabulary does not match")]
    VocabularyMismatch,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Recurrent state `(h, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Real> LstmState<T> {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![T::zero(); hidden],
            c: vec![T::zero(); hidden],
        }
    }
}

/// Outputs of one decoder step; the final distribution is
/// `gate · p_vocab + (1 - gate) · p_copy` with copy mass placed on the
/// record values.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderStep<T> {
    pub hidden: Vec<T>,
    pub gate: T,
    pub p_vocab: Vec<T>,
    pub p_copy: Vec<T>,
}

/// Parameters together with the vocabulary they index.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub params: ModelParams<T>,
    pub vocab: Vocabulary,
}

impl<T: Real> Model<T> {
    pub fn new(params: ModelParams<T>, vocab: Vocabulary) -> Result<Self, ModelError> {
        if params.dims.vocab_size != vocab.len() {
            return Err(ModelError::DimensionMismatch {
                expected: vocab.len(),
                got: params.dims.vocab_size,
            });
        }
        Ok(Model { params, vocab })
    }

    /// Randomly initialized model, deterministic under `seed`.
    pub fn init(vocab: Vocabulary, embed_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let dims = ModelDims {
            vocab_size: vocab.len(),
            embed_dim,
            hidden_dim,
        };
        let params = ModelParams::init(dims, &mut ChaCha8Rng::seed_from_u64(seed));
        Model { params, vocab }
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            params: self.params.cast(),
            vocab: self.vocab.clone(),
        }
    }
}
