//! Losses, manual backpropagation, Adam and the two-phase training loop.

mod config;
mod gradcheck;
mod loss;
mod optim;
mod trainer;
mod triple;

use thiserror::Error;

pub use config::{CopyMass, CoverageMode, LossWeights, Phase, TrainConfig, DEFAULT_PROB_FLOOR};
pub use gradcheck::{
    check_gradients, gradcheck_model, gradient_check, relative_error, GradCheckReport, GRADCHECK_INIT_SCALE,
};
pub use loss::{
    coverage_penalty, gradients, loss_terms, sequence_nll, teacher_forced_accuracy, total_loss, with_eos, LossBreakdown,
};
pub use optim::Adam;
pub use trainer::{build_vocab, retrieve_triples, train, train_model, EpochLog};
pub use triple::{resolve_triples, TrainingTriple};

use crate::corpus::CorpusError;
use crate::model::{ModelError, ModelParams};
use crate::retrieval::RetrievalError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("target sequence must end with the end-of-sequence token")]
    MissingEos,
    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(&'static str),
    #[error("no query has an exemplar in range")]
    NoTriples,
    #[error("training diverged in epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        /// Parameters at the start of the failing epoch.
        last_good: Box<ModelParams<f64>>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}
