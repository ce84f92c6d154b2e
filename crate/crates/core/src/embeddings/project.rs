use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingMatrix;
use crate::corpus::{Vocabulary, PAD_ID};
use crate::error::{Error, Result};

/// How rows are filled for vocabulary tokens missing from the source vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OovPolicy {
    Zero,
    Uniform { low: f32, high: f32, seed: u64 },
}

impl Default for OovPolicy {
    fn default() -> Self {
        OovPolicy::Uniform {
            low: -0.25,
            high: 0.25,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub matrix: EmbeddingMatrix,
    /// Corpus tokens (ids ≥ 2) found in the source vectors.
    pub found: usize,
    /// `found` over the number of corpus tokens.
    pub coverage: f64,
}

/// Builds a task embedding with one row per vocabulary id. The PAD row is
/// zero, known tokens copy their source row, the rest follow `policy`
/// (filled in id order from a single seeded stream).
pub fn project_to_vocab(
    source_tokens: &[String],
    source: &EmbeddingMatrix,
    vocab: &Vocabulary,
    policy: &OovPolicy,
) -> Result<Projection> {
    if source_tokens.len() != source.rows() {
        return Err(Error::shape(
            "project_to_vocab",
            format!("{} tokens for {} source rows", source_tokens.len(), source.rows()),
        ));
    }
    let dim = source.dim();
    let index: HashMap<&str, usize> = source_tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut rng = match policy {
        OovPolicy::Uniform { low, high, seed } => {
            if !(low < high) {
                return Err(Error::Config(format!("OOV range [{low}, {high}) is empty")));
            }
            Some(ChaCha8Rng::seed_from_u64(*seed))
        }
        OovPolicy::Zero => None,
    };
    let mut out = EmbeddingMatrix::zeros(vocab.len(), dim);
    let mut found = 0usize;
    for (id, tok) in vocab.tokens().iter().enumerate() {
        if id == PAD_ID {
            continue;
        }
        match index.get(tok.as_str()) {
            Some(&src) => {
                out.row_mut(id).copy_from_slice(source.row(src));
                if id >= 2 {
                    found += 1;
                }
            }
            None => {
                if let (Some(rng), OovPolicy::Uniform { low, high, .. }) = (rng.as_mut(), policy) {
                    for v in out.row_mut(id) {
                        *v = rng.gen_range(*low..*high);
                    }
                }
            }
        }
    }
    let corpus = vocab.len().saturating_sub(2);
    Ok(Projection {
        matrix: out,
        found,
        coverage: if corpus == 0 { 0.0 } else { found as f64 / corpus as f64 },
    })
}

/// Projection onto a vocabulary whose dimension must equal `expected_dim`.
pub fn project_checked(
    source_tokens: &[String],
    source: &EmbeddingMatrix,
    vocab: &Vocabulary,
    policy: &OovPolicy,
    expected_dim: usize,
) -> Result<Projection> {
    if source.dim() != expected_dim {
        return Err(Error::shape(
            "project_to_vocab",
            format!("source dimension {} but model expects {expected_dim}", source.dim()),
        ));
    }
    project_to_vocab(source_tokens, source, vocab, policy)
}
