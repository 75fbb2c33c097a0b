//! Records, descriptions, tokenization, vocabulary and corpus files.

mod io;
mod record;
mod synthetic;
mod tokenize;
mod vocab;

use thiserror::Error;

pub use io::{load_corpus, pair_to_line, parse_pair_line, read_corpus, save_corpus, write_corpus};
pub use record::{CorpusPair, Entry, Record, DEFAULT_MAX_ENTRIES};
pub use synthetic::{generate_synthetic, Clause, FieldSpec, Pattern, SyntheticSpec, PATTERN_SET_VERSION};
pub use tokenize::{detokenize, normalize_value, tokenize, ValueNormalizer};
pub use vocab::{
    Vocabulary, BOS, BOS_TOKEN, EOS, EOS_TOKEN, MASK, MASK_TOKEN, PAD, PAD_TOKEN, UNK, UNK_TOKEN,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("record must have between 1 and {max} entries, got {count}")]
    EntryCount { count: usize, max: usize },
    #[error("empty field name")]
    EmptyField,
    #[error("duplicate field {0:?} in record")]
    DuplicateField(String),
    #[error("value {value:?} of field {field:?} is not a single non-empty token")]
    InvalidValue { field: String, value: String },
    #[error("empty raw value for field {0:?}")]
    EmptyValue(String),
    #[error("pair {0:?} has an empty description")]
    EmptyText(String),
    #[error("pair {0:?} contains an empty or whitespace token")]
    InvalidToken(String),
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("token {0:?} listed twice")]
    DuplicateToken(String),
    #[error("vocabulary file does not start with the reserved tokens")]
    MalformedVocabulary,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<CorpusError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
