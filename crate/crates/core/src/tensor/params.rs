use rand::Rng;

use super::graph::Gradients;
use super::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    /// Empty until the first gradient is accumulated.
    pub grad: Vec<T>,
    pub trainable: bool,
}

/// Named parameter tensors and their accumulated gradients.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>, trainable: bool) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
            grad: Vec::new(),
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    /// Total scalar count of trainable parameters, or of all parameters.
    pub fn count(&self, include_frozen: bool) -> usize {
        self.params
            .iter()
            .filter(|p| include_frozen || p.trainable)
            .map(|p| p.value.numel())
            .sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Adds a backward result into the stored gradients. Repeated calls accumulate.
    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (id, g) in grads.iter() {
            let p = &mut self.params[id.0];
            if !p.trainable {
                continue;
            }
            if p.grad.is_empty() {
                p.grad = vec![T::zero(); p.value.numel()];
            }
            for (a, &b) in p.grad.iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    pub fn snapshot(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Tensor<T>]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::shape(
                "restore",
                format!("{} tensors for {} parameters", values.len(), self.params.len()),
            ));
        }
        for (p, v) in self.params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(Error::shape(
                    "restore",
                    format!("{}: {:?} vs {:?}", p.name, p.value.shape(), v.shape()),
                ));
            }
            p.value = v.clone();
        }
        Ok(())
    }
}

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<T: Real, R: Rng>(rng: &mut R, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| T::lit(rng.gen_range(-limit..limit)))
}
