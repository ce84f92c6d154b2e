use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
    Sgd { lr: f64, momentum: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Adam { lr, .. } | OptimizerConfig::Sgd { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr() > 0.0 && self.lr().is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr())));
        }
        match *self {
            OptimizerConfig::Adam { beta1, beta2, eps, .. } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                    return Err(Error::Config(format!("adam betas ({beta1}, {beta2}) / eps {eps} invalid")));
                }
            }
            OptimizerConfig::Sgd { momentum, .. } => {
                if !(0.0..1.0).contains(&momentum) {
                    return Err(Error::Config(format!("momentum {momentum} outside [0, 1)")));
                }
            }
        }
        Ok(())
    }
}

/// Optimizer state for one parameter store. Frozen parameters and
/// parameters without gradients are left alone.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    config: OptimizerConfig,
    clip_norm: Option<f64>,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    steps: u64,
}

impl<T: Real> Optimizer<T> {
    pub fn new(config: OptimizerConfig, clip_norm: Option<f64>) -> Result<Self> {
        config.validate()?;
        if let Some(c) = clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("grad_clip_norm {c} must be positive")));
            }
        }
        Ok(Optimizer {
            config,
            clip_norm,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update from the accumulated gradients and returns the
    /// global gradient norm before clipping.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<f64> {
        let mut sq = 0.0f64;
        for (_, p) in store.iter() {
            if !p.trainable {
                continue;
            }
            for &g in &p.grad {
                if !g.is_finite() {
                    return Err(Error::NonFinite(format!("gradient of `{}`", p.name)));
                }
                sq += g.as_f64() * g.as_f64();
            }
        }
        let norm = sq.sqrt();
        let scale = match self.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        if self.first.len() < store.len() {
            self.first.resize(store.len(), Vec::new());
            self.second.resize(store.len(), Vec::new());
        }
        self.steps += 1;
        let scale = T::lit(scale);
        match self.config {
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(eps));
                let (one_b1, one_b2) = (T::lit(1.0 - beta1), T::lit(1.0 - beta2));
                // lr·m̂/(√v̂+ε) with the bias corrections folded into the step size.
                let step_size = T::lit(lr / c1);
                let sqrt_c2 = T::lit(c2.sqrt());
                for (i, p) in store.iter_mut().enumerate() {
                    if !p.trainable || p.grad.is_empty() {
                        continue;
                    }
                    let m = &mut self.first[i];
                    let v = &mut self.second[i];
                    if m.is_empty() {
                        *m = vec![T::zero(); p.grad.len()];
                        *v = vec![T::zero(); p.grad.len()];
                    }
                    for (((w, &g), m), v) in p.value.data_mut().iter_mut().zip(&p.grad).zip(m).zip(v) {
                        let g = g * scale;
                        *m = b1 * *m + one_b1 * g;
                        *v = b2 * *v + one_b2 * g * g;
                        *w -= step_size * *m / (v.sqrt() / sqrt_c2 + eps);
                    }
                }
            }
            OptimizerConfig::Sgd { lr, momentum } => {
                let (lr, mu) = (T::lit(lr), T::lit(momentum));
                for (i, p) in store.iter_mut().enumerate() {
                    if !p.trainable || p.grad.is_empty() {
                        continue;
                    }
                    if momentum == 0.0 {
                        for (w, &g) in p.value.data_mut().iter_mut().zip(&p.grad) {
                            *w -= lr * g * scale;
                        }
                        continue;
                    }
                    let vel = &mut self.first[i];
                    if vel.is_empty() {
                        *vel = vec![T::zero(); p.grad.len()];
                    }
                    for ((w, &g), u) in p.value.data_mut().iter_mut().zip(&p.grad).zip(vel) {
                        *u = mu * *u + g * scale;
                        *w -= lr * *u;
                    }
                }
            }
        }
        Ok(norm)
    }
}
