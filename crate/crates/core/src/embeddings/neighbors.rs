use std::collections::HashMap;

use super::matrix::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Tokens with their vectors, indexed for similarity queries.
#[derive(Debug, Clone)]
pub struct WordVectors {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    matrix: EmbeddingMatrix,
}

impl WordVectors {
    pub fn new(tokens: Vec<String>, matrix: EmbeddingMatrix) -> Result<Self> {
        if tokens.len() != matrix.rows() {
            return Err(Error::shape(
                "word vectors",
                format!("{} tokens for {} rows", tokens.len(), matrix.rows()),
            ));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(WordVectors { tokens, index, matrix })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| self.matrix.row(i))
    }

    pub fn cosine(&mut self, a: &str, b: &str) -> Result<f32> {
        let ia = *self.index.get(a).ok_or_else(|| Error::UnknownToken(a.to_string()))?;
        let ib = *self.index.get(b).ok_or_else(|| Error::UnknownToken(b.to_string()))?;
        Ok(self.cosine_ids(ia, ib))
    }

    fn cosine_ids(&mut self, a: usize, b: usize) -> f32 {
        let (na, nb) = {
            let n = self.matrix.norms();
            (n[a], n[b])
        };
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let dot: f32 = self.matrix.row(a).iter().zip(self.matrix.row(b)).map(|(x, y)| x * y).sum();
        dot / (na * nb)
    }

    /// The `k` most cosine-similar tokens to `query` (excluding itself),
    /// descending, ties broken lexicographically.
    pub fn nearest_neighbors(&mut self, query: &str, k: usize) -> Result<Vec<(String, f32)>> {
        let q = *self.index.get(query).ok_or_else(|| Error::UnknownToken(query.to_string()))?;
        if k >= self.tokens.len() {
            return Err(Error::Config(format!(
                "k = {k} must be smaller than the vocabulary size {}",
                self.tokens.len()
            )));
        }
        let mut scored: Vec<(usize, f32)> = (0..self.tokens.len())
            .filter(|&i| i != q)
            .map(|i| (i, self.cosine_ids(q, i)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.tokens[a.0].cmp(&self.tokens[b.0]))
        });
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(i, c)| (self.tokens[i].clone(), c))
            .collect())
    }
}
