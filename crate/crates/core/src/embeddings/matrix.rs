use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Row-major V×D word-vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
    norm_cache: Option<Vec<f32>>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        if values.len() != rows * dim {
            return Err(Error::shape(
                "embedding matrix",
                format!("{rows}×{dim} needs {} values, got {}", rows * dim, values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding row {} column {}", i / dim, i % dim)));
        }
        Ok(EmbeddingMatrix {
            rows,
            dim,
            values,
            norm_cache: None,
        })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            rows,
            dim,
            values: vec![0.0; rows * dim],
            norm_cache: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        self.norm_cache = None;
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Euclidean row norms, computed once and cached until a row is mutated.
    pub fn norms(&mut self) -> &[f32] {
        if self.norm_cache.is_none() {
            let n = self
                .values
                .chunks(self.dim)
                .map(|r| r.iter().map(|v| v * v).sum::<f32>().sqrt())
                .collect();
            self.norm_cache = Some(n);
        }
        self.norm_cache.as_deref().expect("just filled")
    }

    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        Tensor::new(
            vec![self.rows, self.dim],
            self.values.iter().map(|&v| T::lit(v as f64)).collect(),
        )
        .expect("shape matches")
    }

    pub fn from_tensor<T: Real>(t: &Tensor<T>) -> Result<Self> {
        match t.shape() {
            &[r, d] => EmbeddingMatrix::new(r, d, t.data().iter().map(|v| v.as_f64() as f32).collect()),
            s => Err(Error::shape("embedding matrix", format!("expected rank 2, got {s:?}"))),
        }
    }
}

pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|v| v * v).sum::<f32>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f32>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
