//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "D2TCKPT\0"
//! version    u32
//! vocab_size u64, embed_dim u64, hidden_dim u64
//! hash_len   u32, vocabulary hash (ASCII hex)
//! count      u32
//! count × { name_len u32, name, rows u64, cols u64, rows*cols × f64 }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::{Model, ModelDims, ModelError, ModelParams};
use crate::corpus::Vocabulary;
use crate::numeric::Real;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"D2TCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint<T: Real>(params: &ModelParams<T>, vocab: &Vocabulary) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let d = params.dims;
    for n in [d.vocab_size, d.embed_dim, d.hidden_dim] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    let hash = vocab.hash();
    out.extend_from_slice(&(hash.len() as u32).to_le_bytes());
    out.extend_from_slice(hash.as_bytes());
    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        for x in t.data() {
            out.extend_from_slice(&x.f64().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or(ModelError::Checkpoint("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize, ModelError> {
        usize::try_from(self.u64()?).map_err(|_| ModelError::Checkpoint("size overflow".into()))
    }

    fn string(&mut self) -> Result<String, ModelError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| ModelError::Checkpoint("non-UTF-8 string".into()))
    }
}

/// Decodes a checkpoint, rejecting it unless it was written for `vocab`.
pub fn decode_checkpoint<T: Real>(bytes: &[u8], vocab: &Vocabulary) -> Result<ModelParams<T>, ModelError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(ModelError::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported format version {version}")));
    }
    let dims = ModelDims {
        vocab_size: r.usize()?,
        embed_dim: r.usize()?,
        hidden_dim: r.usize()?,
    };
    let hash = r.string()?;
    if hash != vocab.hash() || dims.vocab_size != vocab.len() {
        return Err(ModelError::VocabularyMismatch);
    }
    let mut params = ModelParams::<T>::zeros(dims);
    let count = r.u32()? as usize;
    let mut seen = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rows = r.usize()?;
        let cols = r.usize()?;
        let t = params
            .tensor_mut(&name)
            .ok_or_else(|| ModelError::Checkpoint(format!("unknown tensor {name}")))?;
        if t.shape() != (rows, cols) {
            return Err(ModelError::Checkpoint(format!(
                "tensor {name} is {rows}x{cols}, expected {:?}",
                t.shape()
            )));
        }
        let raw = r.take(rows * cols * 8)?;
        for (dst, chunk) in t.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *dst = T::of(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
        }
        seen.push(name);
    }
    for name in ModelParams::<T>::TENSOR_NAMES {
        if !seen.iter().any(|s| s == name) {
            return Err(ModelError::Checkpoint(format!("missing tensor {name}")));
        }
    }
    if r.pos != bytes.len() {
        return Err(ModelError::Checkpoint("trailing bytes".into()));
    }
    Ok(params)
}

/// Path of the vocabulary file stored next to a checkpoint.
pub fn vocab_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_os_string();
    s.push(".vocab");
    PathBuf::from(s)
}

impl<T: Real> Model<T> {
    /// Writes the checkpoint and its `.vocab` sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, encode_checkpoint(&self.params, &self.vocab))?;
        fs::write(vocab_path(path), self.vocab.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let vocab = Vocabulary::from_text(&fs::read_to_string(vocab_path(path))?)
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let params = decode_checkpoint(&fs::read(path)?, &vocab)?;
        Ok(Model { params, vocab })
    }
}
