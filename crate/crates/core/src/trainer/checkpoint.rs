//! Binary checkpoint container.
//!
//! Layout (integers little-endian, strings as u32 length + UTF-8):
//! magic `JLCK`, version string, architecture name, layer-size table
//! (u32 count, then name + u64 value), word vocabulary (u32 count, words in
//! id order after the reserved symbols), character vocabulary (u32 count,
//! u32 code points in id order), configuration text (u64 length + UTF-8),
//! tensors (u32 count, then name, u32 rank, u64 dims, f64 values), and a
//! SHA-256 digest of everything before it.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::autodiff::{ParamStore, Tensor};
use crate::corpus::{CharVocab, WordVocab};
use crate::error::{Error, Result};
use crate::model::{Architecture, LayerSizes, Model, ModelParams};

const MAGIC: &[u8; 4] = b"JLCK";
pub const CHECKPOINT_VERSION: &str = "jointlabel-ckpt-v1";
const DIGEST_LEN: usize = 32;

/// A model together with the configuration text it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub config_text: String,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

pub fn checkpoint_bytes(model: &Model, config_text: &str) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    w.str(CHECKPOINT_VERSION);
    w.str(model.params.arch.name());
    let table = model.params.sizes.as_table();
    w.u32(table.len());
    for (name, v) in table {
        w.str(name);
        w.u64(v as u64);
    }
    w.u32(model.words.words().len());
    for word in model.words.words() {
        w.str(word);
    }
    w.u32(model.chars.chars().len());
    for &c in model.chars.chars() {
        w.u32(c as usize);
    }
    w.u64(config_text.len() as u64);
    w.0.extend_from_slice(config_text.as_bytes());
    w.u32(model.params.store.len());
    for (_, name, t) in model.params.store.iter() {
        w.str(name);
        w.u32(t.rank());
        for &d in t.shape() {
            w.u64(d as u64);
        }
        for v in t.data() {
            w.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(digest.as_slice());
    w.0
}

/// Writes the checkpoint atomically: to a sibling temporary file first, then
/// renamed into place.
pub fn save_checkpoint(model: &Model, config_text: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, checkpoint_bytes(model, config_text))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_checkpoint(&bytes)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn truncated() -> Error {
    Error::Integrity("checkpoint is truncated".into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn len64(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| truncated())
    }

    fn utf8(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Integrity("invalid UTF-8 in checkpoint".into()))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        self.utf8(n)
    }
}

/// Decodes a checkpoint. The version is checked before the digest so that
/// files written by another format version report as such.
pub fn parse_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Integrity("not a checkpoint file".into()));
    }
    let mut r = Reader {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let version = r.str()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION.to_string(),
        });
    }
    if bytes.len() < r.pos + DIGEST_LEN {
        return Err(truncated());
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Integrity("checkpoint digest mismatch".into()));
    }
    r.buf = body;

    let arch = Architecture::parse(&r.str()?).map_err(|e| Error::Integrity(e.to_string()))?;
    let mut table = BTreeMap::new();
    for _ in 0..r.u32()? {
        let name = r.str()?;
        let v = usize::try_from(r.u64()?).map_err(|_| truncated())?;
        table.insert(name, v);
    }
    let sizes = LayerSizes::from_table(&table)?;
    let n_words = r.u32()?;
    let words = (0..n_words).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
    let words = WordVocab::from_words(words)?;
    let n_chars = r.u32()?;
    let chars = (0..n_chars)
        .map(|_| {
            let code = r.u32()? as u32;
            char::from_u32(code)
                .ok_or_else(|| Error::Integrity(format!("invalid character code {code}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let chars = CharVocab::from_chars(chars)?;
    let n = r.len64()?;
    let config_text = r.utf8(n)?;

    let mut store = ParamStore::new();
    for _ in 0..r.u32()? {
        let name = r.str()?;
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.len64()).collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(truncated)?;
        let raw = r.take(count.checked_mul(8).ok_or_else(truncated)?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let tensor = Tensor::new(shape, data)
            .map_err(|e| Error::Integrity(format!("tensor {name}: {e}")))?;
        store.insert(name, tensor)?;
    }
    if r.pos != body.len() {
        return Err(Error::Integrity("trailing bytes after tensors".into()));
    }
    let params = ModelParams::from_store(sizes, arch, store)?;
    Ok(Checkpoint {
        model: Model::new(params, words, chars)?,
        config_text,
    })
}

impl Checkpoint {
    /// Checks the stored tensors against the layout implied by `sizes`,
    /// naming the first tensor whose shape differs.
    pub fn expect_sizes(&self, sizes: &LayerSizes) -> Result<()> {
        let store = &self.model.params.store;
        for spec in crate::model::param_specs(sizes, self.model.params.arch) {
            if let Some(t) = store.by_name(&spec.name) {
                if t.shape() != spec.shape.as_slice() {
                    return Err(Error::TensorShape {
                        name: spec.name,
                        expected: spec.shape,
                        found: t.shape().to_vec(),
                    });
                }
            }
        }
        Ok(())
    }
}
