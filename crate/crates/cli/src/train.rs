//! Model training in holdout or k-fold mode.

use std::fs;

use feedback_core::models::{save_checkpoint, Model, TrainingMeta};
use feedback_core::training::{
    holdout_subset, kfold_split, split_dataset, train_model, write_history_csv, History, SplitMode,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::hashes;
use crate::manifest::Layout;
use crate::{embed, prepare};

pub const CHECKPOINT: &str = "model.ckpt";
pub const HISTORY: &str = "history.csv";
pub const SPLITS: &str = "splits.json";

/// Index sets of one training run: `test` is held out for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub kfold: bool,
    pub runs: Vec<RunSplit>,
    /// Run whose checkpoint was copied to `model.ckpt`.
    pub selected: usize,
}

fn make_splits(cfg: &ExperimentConfig, labels: &[usize], class_names: &[String]) -> Result<Vec<RunSplit>> {
    match cfg.split.mode {
        SplitMode::Holdout { .. } => {
            let s = split_dataset(labels, class_names, &cfg.split)?;
            Ok(vec![RunSplit {
                train: s.train,
                val: s.val,
                test: s.test,
            }])
        }
        SplitMode::Kfold { k, holdout_val_frac } => {
            if holdout_val_frac <= 0.0 {
                return Err(CliError::Config(
                    "kfold training needs split.holdout_val_frac > 0 for early stopping".into(),
                ));
            }
            let folds = kfold_split(labels, class_names.len(), k, cfg.split.seed)?;
            folds
                .into_iter()
                .enumerate()
                .map(|(f, fold)| {
                    let (train, val) = holdout_subset(
                        &fold.train,
                        labels,
                        class_names.len(),
                        holdout_val_frac,
                        cfg.split.seed.wrapping_add(f as u64 + 1),
                    )?;
                    Ok(RunSplit {
                        train,
                        val,
                        test: fold.test,
                    })
                })
                .collect()
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    let layout = Layout::new(&cfg.paths.output_dir)?;
    let prepared = prepare::load(cfg, &layout)?;
    let embedding = embed::load(cfg, &layout)?;
    let hash = hashes::train(cfg)?;
    let labels = prepared.labels();
    let runs = make_splits(cfg, &labels, &prepared.class_names)?;
    for r in &runs {
        if r.val.is_empty() || r.train.is_empty() {
            return Err(feedback_core::Error::Empty(format!(
                "split leaves {} training and {} validation examples",
                r.train.len(),
                r.val.len()
            ))
            .into());
        }
    }
    let mut model_cfg = cfg.model.clone();
    model_cfg.set_task_shape(prepared.vocab.len(), cfg.seq_len, prepared.class_names.len());
    let vocab_hash = prepared.vocab.content_hash();
    let kfold = runs.len() > 1 || matches!(cfg.split.mode, SplitMode::Kfold { .. });

    let mut artifacts = Vec::new();
    let mut summaries = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in runs.iter().enumerate() {
        let pick = |idx: &[usize]| idx.iter().map(|&j| prepared.examples[j].clone()).collect::<Vec<_>>();
        let (train, val) = (pick(&r.train), pick(&r.val));
        let mut model = Model::<f32>::build(model_cfg.clone(), &embedding, cfg.seed)?;
        log::info!(
            "run {}/{}: {} train, {} val, {} held out",
            i + 1,
            runs.len(),
            train.len(),
            val.len(),
            r.test.len()
        );
        let history: History = train_model(&mut model, &train, &val, &cfg.train)?;
        let meta = TrainingMeta {
            epoch: history.best_epoch,
            val_loss: Some(history.best_val_loss),
        };
        let prefix = if kfold {
            layout.fold_dir(i + 1)?;
            format!("fold_{}/", i + 1)
        } else {
            String::new()
        };
        let ckpt = format!("{prefix}{CHECKPOINT}");
        let hist = format!("{prefix}{HISTORY}");
        save_checkpoint(&layout.path(&ckpt), &model, &vocab_hash, &meta)?;
        write_history_csv(&layout.path(&hist), &history)?;
        artifacts.push(ckpt);
        artifacts.push(hist);
        summaries.push(json!({
            "run": i + 1,
            "epochs": history.epochs.len(),
            "best_epoch": history.best_epoch,
            "best_val_loss": history.best_val_loss,
            "stopped_early": history.stopped_early,
        }));
        if best.is_none_or(|(_, l)| history.best_val_loss < l) {
            best = Some((i, history.best_val_loss));
        }
    }
    let (selected, _) = best.expect("at least one run");
    if kfold {
        let from = layout.path(&format!("fold_{}/{CHECKPOINT}", selected + 1));
        fs::copy(&from, layout.path(CHECKPOINT)).map_err(|e| CliError::io(&from, e))?;
        artifacts.push(CHECKPOINT.to_string());
    }
    let splits = Splits {
        kfold,
        runs,
        selected,
    };
    feedback_core::training::write_json(&layout.path(SPLITS), &splits)?;
    artifacts.push(SPLITS.to_string());
    layout.write_manifest(
        "train",
        &hash,
        Some(&hashes::embed(cfg)?),
        &artifacts,
        json!({
            "architecture": model_cfg.architecture(),
            "model": model_cfg,
            "vocab_hash": vocab_hash,
            "runs": summaries,
            "selected_run": selected + 1,
        }),
    )
}
