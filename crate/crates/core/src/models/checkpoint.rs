//! Binary checkpoint format. Byte layout is documented in docs/checkpoint-format.md.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{probe_ids, Architecture, Model, ModelConfig};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"FBCKPT01";
const VERSION: u32 = 1;
const PROBE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epoch: usize,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointInfo {
    pub architecture: Architecture,
    pub vocab_hash: String,
    pub meta: TrainingMeta,
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(buf: &mut Vec<u8>, b: &[u8]) {
    put_u32(buf, b.len() as u32);
    buf.extend_from_slice(b);
}

pub fn save_checkpoint(path: &Path, model: &Model<f32>, vocab_hash: &str, meta: &TrainingMeta) -> Result<()> {
    let config = serde_json::to_vec(model.config()).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let meta_json = serde_json::to_vec(meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION);
    put_bytes(&mut buf, model.architecture().tag().as_bytes());
    put_bytes(&mut buf, &config);
    put_bytes(&mut buf, vocab_hash.as_bytes());
    put_bytes(&mut buf, &meta_json);
    put_u32(&mut buf, model.params().len() as u32);
    for (_, p) in model.params().iter() {
        if !p.value.is_finite() {
            return Err(Error::NonFinite(format!("parameter `{}` before checkpointing", p.name)));
        }
        put_bytes(&mut buf, p.name.as_bytes());
        put_u32(&mut buf, p.value.shape().len() as u32);
        for &d in p.value.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in p.value.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let cfg = model.config();
    let probe = model.predict(&probe_ids(cfg.vocab_size(), cfg.seq_len()), 2)?;
    put_u32(&mut buf, 2);
    put_u32(&mut buf, cfg.num_classes() as u32);
    for &x in probe.data() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn string(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| Error::Checkpoint("non-UTF-8 header field".into()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Loads a checkpoint, verifying the stored probe outputs. When
/// `expected_arch` or `expected_vocab_hash` is given, a mismatch is an error.
pub fn load_checkpoint(
    path: &Path,
    expected_arch: Option<Architecture>,
    expected_vocab_hash: Option<&str>,
) -> Result<(Model<f32>, CheckpointInfo)> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(8).ok() != Some(&MAGIC[..]) {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint (bad magic)", path.display())));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let tag = r.string()?;
    let config: ModelConfig =
        serde_json::from_slice(r.bytes()?).map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
    let arch = config.architecture();
    if arch.tag() != tag {
        return Err(Error::Checkpoint(format!(
            "architecture tag `{tag}` disagrees with config architecture `{}`",
            arch.tag()
        )));
    }
    if let Some(want) = expected_arch {
        if want != arch {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds a `{}` model, expected `{}`",
                arch.tag(),
                want.tag()
            )));
        }
    }
    let vocab_hash = r.string()?;
    if let Some(want) = expected_vocab_hash {
        if want != vocab_hash {
            return Err(Error::Checkpoint(format!(
                "`{tag}` checkpoint was trained on vocabulary {vocab_hash}, current vocabulary is {want}"
            )));
        }
    }
    let meta: TrainingMeta =
        serde_json::from_slice(r.bytes()?).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;

    let count = r.u32()? as usize;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let n = shape.iter().product();
        let data = r.f32s(n)?;
        values.push((name, Tensor::new(shape, data)?));
    }

    let placeholder = EmbeddingMatrix::zeros(config.vocab_size(), config.dim());
    let mut model = Model::<f32>::build(config, &placeholder, 0)
        .map_err(|e| Error::Checkpoint(format!("`{tag}` checkpoint config: {e}")))?;
    model
        .load_values(values)
        .map_err(|e| Error::Checkpoint(format!("`{tag}` checkpoint: {e}")))?;

    let batch = r.u32()? as usize;
    let classes = r.u32()? as usize;
    let stored = r.f32s(batch * classes)?;
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    let cfg = model.config();
    if batch != 2 || classes != cfg.num_classes() {
        return Err(Error::Checkpoint(format!("probe block is {batch}×{classes}")));
    }
    let probe = model.predict(&probe_ids(cfg.vocab_size(), cfg.seq_len()), 2)?;
    for (i, (&a, &b)) in probe.data().iter().zip(&stored).enumerate() {
        if (a as f64 - b as f64).abs() > PROBE_TOLERANCE {
            return Err(Error::Checkpoint(format!(
                "`{tag}` probe output {i} is {a}, stored {b}; weights do not reproduce"
            )));
        }
    }
    Ok((
        model,
        CheckpointInfo {
            architecture: arch,
            vocab_hash,
            meta,
        },
    ))
}
