use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, Metrics};
use super::optim::{Optimizer, OptimizerConfig};
use crate::corpus::EncodedExample;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::tensor::{Graph, Mode, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarlyStoppingConfig {
    pub patience: usize,
    pub restore_best: bool,
}

impl Default for EarlyStoppingConfig {
    fn default() -> Self {
        EarlyStoppingConfig {
            patience: 3,
            restore_best: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub optimizer: OptimizerConfig,
    pub early_stopping: EarlyStoppingConfig,
    pub seed: u64,
    pub grad_clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 50,
            optimizer: OptimizerConfig::default(),
            early_stopping: EarlyStoppingConfig::default(),
            seed: 1,
            grad_clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be ≥ 1".into()));
        }
        if self.early_stopping.patience == 0 {
            return Err(Error::Config("early stopping patience must be ≥ 1".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Validation-loss early stopping: an epoch improves when its loss is
/// strictly below the best so far; training stops after `patience`
/// consecutive epochs without improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.wait = 0;
            return StopDecision::Improved;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights the model holds at the end.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn flatten_ids(model_len: usize, batch: &[&EncodedExample]) -> Result<Vec<usize>> {
    let mut ids = Vec::with_capacity(batch.len() * model_len);
    for ex in batch {
        if ex.ids.len() != model_len {
            return Err(Error::shape(
                "batch",
                format!("example has {} ids, model expects {model_len}", ex.ids.len()),
            ));
        }
        ids.extend_from_slice(&ex.ids);
    }
    Ok(ids)
}

fn grad_norms<T: Real>(model: &Model<T>) -> String {
    model
        .params()
        .iter()
        .filter(|(_, p)| !p.grad.is_empty())
        .map(|(_, p)| {
            let n = p.grad.iter().map(|g| g.as_f64() * g.as_f64()).sum::<f64>().sqrt();
            format!("{}={n:.3e}", p.name)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Mini-batch training with per-epoch seeded shuffling and validation-loss
/// early stopping. On return the model holds the best-epoch weights when
/// `restore_best` is set.
pub fn train_model<T: Real>(
    model: &mut Model<T>,
    train: &[EncodedExample],
    val: &[EncodedExample],
    config: &TrainConfig,
) -> Result<History> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty(format!(
            "training needs examples (train {}, val {})",
            train.len(),
            val.len()
        )));
    }
    let len = model.config().seq_len();
    let mut optimizer = Optimizer::new(config.optimizer, config.grad_clip_norm)?;
    let mut stopper = EarlyStopping::new(config.early_stopping.patience);
    let mut best_weights = None;
    let mut history = History {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, epoch as u64, 0));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&EncodedExample> = chunk.iter().map(|&i| &train[i]).collect();
            let ids = flatten_ids(len, &batch)?;
            let labels: Vec<usize> = batch.iter().map(|e| e.label).collect();
            let (loss, grads) = {
                let mut g = Graph::new(model.params());
                let probs = model.forward(&mut g, &ids, batch.len(), Mode::Train, mix(config.seed, epoch as u64, b as u64 + 1))?;
                let loss = g.cross_entropy(probs, &labels)?;
                (g.value(loss)[0].as_f64(), g.backward(loss)?)
            };
            model.params_mut().zero_grad();
            model.params_mut().accumulate(&grads);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "epoch {epoch}, batch {}: loss {loss}; gradient norms: {}",
                    b + 1,
                    grad_norms(model)
                )));
            }
            optimizer.step(model.params_mut()).map_err(|e| match e {
                Error::NonFinite(what) => Error::NonFinite(format!(
                    "epoch {epoch}, batch {}: {what}; gradient norms: {}",
                    b + 1,
                    grad_norms(model)
                )),
                other => other,
            })?;
            loss_sum += loss * batch.len() as f64;
        }
        let eval = evaluate(model, val, config.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss: eval.loss,
            val_accuracy: eval.metrics.accuracy,
        };
        log::info!(
            "epoch {epoch}: train_loss {:.4} val_loss {:.4} val_accuracy {:.4}",
            record.train_loss,
            record.val_loss,
            record.val_accuracy
        );
        if !record.val_loss.is_finite() {
            return Err(Error::NonFinite(format!("epoch {epoch}: validation loss {}", record.val_loss)));
        }
        history.epochs.push(record);
        let decision = stopper.observe(epoch, eval.loss);
        if decision == StopDecision::Improved && config.early_stopping.restore_best {
            best_weights = Some(model.params().snapshot());
        }
        if decision == StopDecision::Stop {
            history.stopped_early = true;
            break;
        }
    }
    history.best_epoch = stopper.best_epoch();
    history.best_val_loss = stopper.best_loss();
    if let Some(w) = best_weights {
        model.params_mut().restore(&w)?;
    } else {
        history.best_epoch = history.epochs.len();
        history.best_val_loss = history.epochs.last().map_or(f64::INFINITY, |r| r.val_loss);
    }
    model.params_mut().zero_grad();
    Ok(history)
}

/// Infer-mode class probabilities for every example, batched and spread
/// over the available cores. Rows come back in input order.
pub fn predict_proba<T: Real>(model: &Model<T>, examples: &[EncodedExample], batch_size: usize) -> Result<Vec<Vec<T>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be ≥ 1".into()));
    }
    let len = model.config().seq_len();
    let classes = model.config().num_classes();
    let batches: Vec<&[EncodedExample]> = examples.chunks(batch_size).collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(batches.len()).max(1);
    let per_thread = batches.len().div_ceil(threads).max(1);
    let run = |group: &[&[EncodedExample]]| -> Result<Vec<Vec<T>>> {
        let mut rows = Vec::new();
        for batch in group {
            let refs: Vec<&EncodedExample> = batch.iter().collect();
            let probs = model.predict(&flatten_ids(len, &refs)?, batch.len())?;
            rows.extend(probs.data().chunks(classes).map(<[T]>::to_vec));
        }
        Ok(rows)
    };
    let parts: Vec<Result<Vec<Vec<T>>>> = std::thread::scope(|s| {
        let handles: Vec<_> = batches.chunks(per_thread).map(|g| s.spawn(move || run(g))).collect();
        handles.into_iter().map(|h| h.join().expect("prediction thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(examples.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: Metrics,
    /// Mean cross-entropy.
    pub loss: f64,
    pub predictions: Vec<usize>,
}

pub fn evaluate<T: Real>(model: &Model<T>, examples: &[EncodedExample], batch_size: usize) -> Result<Evaluation> {
    if examples.is_empty() {
        return Err(Error::Empty("no examples to evaluate".into()));
    }
    let probs = predict_proba(model, examples, batch_size)?;
    let predictions: Vec<usize> = probs.iter().map(|r| argmax(r)).collect();
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let loss = probs
        .iter()
        .zip(&labels)
        .map(|(r, &y)| -r.get(y).map_or(0.0, |p| p.as_f64()).max(1e-12).ln())
        .sum::<f64>()
        / examples.len() as f64;
    let metrics = compute_metrics(&labels, &predictions, model.config().num_classes())?;
    Ok(Evaluation {
        metrics,
        loss,
        predictions,
    })
}
