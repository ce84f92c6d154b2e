use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Dense token↔id map. Ids 0 and 1 are reserved for padding and unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
    min_count: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    min_count: u64,
    tokens: Vec<(String, u64)>,
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr {
            min_count: v.min_count,
            tokens: v
                .id_to_token
                .into_iter()
                .zip(v.counts)
                .skip(2)
                .collect(),
        }
    }
}

impl TryFrom<VocabRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabRepr) -> Result<Self> {
        Vocabulary::from_counted(r.tokens, r.min_count)
    }
}

impl Vocabulary {
    /// Builds a vocabulary from corpus tokens already in id order (ids 2..).
    pub fn from_counted(tokens: Vec<(String, u64)>, min_count: u64) -> Result<Self> {
        let mut id_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut counts = vec![0, 0];
        let mut token_to_id = HashMap::with_capacity(tokens.len() + 2);
        token_to_id.insert(PAD_TOKEN.to_string(), PAD_ID);
        token_to_id.insert(UNK_TOKEN.to_string(), UNK_ID);
        for (tok, count) in tokens {
            if token_to_id.contains_key(&tok) {
                return Err(Error::Config(format!("duplicate vocabulary token `{tok}`")));
            }
            token_to_id.insert(tok.clone(), id_to_token.len());
            id_to_token.push(tok);
            counts.push(count);
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            counts,
            min_count,
        })
    }

    /// Number of ids including the two reserved slots.
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    /// True when no corpus token made it into the vocabulary.
    pub fn is_empty(&self) -> bool {
        self.id_to_token.len() <= 2
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Corpus frequency of the token with this id (0 for reserved ids).
    pub fn count(&self, id: usize) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Corpus tokens (everything after the reserved ids) with their counts.
    pub fn corpus_entries(&self) -> impl Iterator<Item = (usize, &str, u64)> + '_ {
        self.id_to_token
            .iter()
            .zip(&self.counts)
            .enumerate()
            .skip(2)
            .map(|(i, (t, &c))| (i, t.as_str(), c))
    }

    /// SHA-256 over the id-ordered token list; identifies a vocabulary in checkpoints.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.id_to_token {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Tokens with frequency ≥ `min_count` get ids from 2 upward, most frequent
/// first, ties broken by lexicographic order.
pub fn build_vocabulary<I, S>(token_streams: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator,
    I::Item: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if min_count < 1 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut freq: HashMap<String, u64> = HashMap::new();
    for stream in token_streams {
        for tok in stream {
            let tok = tok.as_ref();
            if let Some(c) = freq.get_mut(tok) {
                *c += 1;
            } else {
                freq.insert(tok.to_string(), 1);
            }
        }
    }
    if freq.is_empty() {
        return Err(Error::Empty("corpus".into()));
    }
    freq.remove(PAD_TOKEN);
    freq.remove(UNK_TOKEN);
    let mut entries: Vec<(String, u64)> = freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_counted(entries, min_count)
}
