use serde::{Deserialize, Serialize};

use super::vocab::{Vocabulary, PAD_ID};

/// A fixed-length id sequence with its class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedExample {
    pub ids: Vec<usize>,
    pub label: usize,
    pub length_unpadded: usize,
}

/// Maps tokens to ids (unknown → UNK), keeps the first `len` and right-pads with PAD.
pub fn encode_sequence<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, len: usize) -> Vec<usize> {
    assert!(len >= 1, "sequence length must be at least 1");
    let mut ids: Vec<usize> = tokens
        .iter()
        .take(len)
        .map(|t| vocab.id_or_unk(t.as_ref()))
        .collect();
    ids.resize(len, PAD_ID);
    ids
}

pub fn encode_example<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    len: usize,
    label: usize,
) -> EncodedExample {
    EncodedExample {
        ids: encode_sequence(tokens, vocab, len),
        label,
        length_unpadded: tokens.len().min(len),
    }
}

/// Inverse of [`encode_sequence`] up to padding.
pub fn decode_sequence(ids: &[usize], vocab: &Vocabulary) -> Vec<String> {
    ids.iter()
        .take_while(|&&id| id != PAD_ID)
        .filter_map(|&id| vocab.token(id).map(str::to_string))
        .collect()
}
