//! Test-set metrics for every training run.

use feedback_core::models::load_checkpoint;
use feedback_core::training::{evaluate, summarize_folds, write_confusion_csv, write_json, FoldSummary, Metrics};
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::hashes;
use crate::manifest::{read_json, Layout};
use crate::prepare;
use crate::train::{Splits, CHECKPOINT, SPLITS};

pub const METRICS: &str = "metrics.json";
pub const CONFUSION: &str = "confusion.csv";
pub const FOLDS_CSV: &str = "folds.csv";

#[derive(Serialize)]
struct KfoldReport<'a> {
    folds: &'a [Metrics],
    summary: FoldSummary,
}

fn fold_rows(path: &std::path::Path, folds: &[Metrics], summary: &FoldSummary) -> Result<()> {
    let mut text = String::from(
        "fold,accuracy,precision_micro,recall_micro,f1_micro,precision_macro,recall_macro,f1_macro\n",
    );
    for (i, m) in folds.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            i + 1,
            m.accuracy,
            m.precision_micro,
            m.recall_micro,
            m.f1_micro,
            m.precision_macro,
            m.recall_macro,
            m.f1_macro
        ));
    }
    let s = summary;
    let cols = [
        s.accuracy,
        s.precision_micro,
        s.recall_micro,
        s.f1_micro,
        s.precision_macro,
        s.recall_macro,
        s.f1_macro,
    ];
    for (name, pick) in [("mean", 0), ("std", 1)] {
        text.push_str(name);
        for c in cols {
            text.push_str(&format!(",{}", if pick == 0 { c.mean } else { c.std }));
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    let layout = Layout::new(&cfg.paths.output_dir)?;
    let prepared = prepare::load(cfg, &layout)?;
    let train_hash = hashes::train(cfg)?;
    layout.require("train", &train_hash)?;
    let splits: Splits = read_json(&layout.path(SPLITS))?;
    let vocab_hash = prepared.vocab.content_hash();
    let batch = cfg.train.batch_size;
    let mut per_run = Vec::new();
    let mut artifacts = Vec::new();
    for (i, run) in splits.runs.iter().enumerate() {
        if run.test.is_empty() {
            return Err(feedback_core::Error::Empty(format!("run {} has no test examples", i + 1)).into());
        }
        let ckpt = if splits.kfold {
            format!("fold_{}/{CHECKPOINT}", i + 1)
        } else {
            CHECKPOINT.to_string()
        };
        let (model, _) = load_checkpoint(&layout.path(&ckpt), Some(cfg.model.architecture()), Some(&vocab_hash))?;
        let test: Vec<_> = run.test.iter().map(|&j| prepared.examples[j].clone()).collect();
        let eval = evaluate(&model, &test, batch)?;
        log::info!(
            "run {}: accuracy {:.4}, macro F1 {:.4}, loss {:.4}",
            i + 1,
            eval.metrics.accuracy,
            eval.metrics.f1_macro,
            eval.loss
        );
        if splits.kfold {
            let dir = format!("fold_{}/", i + 1);
            write_json(&layout.path(&format!("{dir}{METRICS}")), &eval.metrics)?;
            write_confusion_csv(&layout.path(&format!("{dir}{CONFUSION}")), &eval.metrics, &prepared.class_names)?;
            artifacts.push(format!("{dir}{METRICS}"));
            artifacts.push(format!("{dir}{CONFUSION}"));
        }
        per_run.push(eval.metrics);
    }
    let details = if splits.kfold {
        let summary = summarize_folds(&per_run)?;
        write_json(
            &layout.path(METRICS),
            &KfoldReport {
                folds: &per_run,
                summary: summary.clone(),
            },
        )?;
        fold_rows(&layout.path(FOLDS_CSV), &per_run, &summary)?;
        // pooled confusion over all test folds
        let c = prepared.class_names.len();
        let mut pooled = per_run[0].clone();
        pooled.confusion_matrix = vec![vec![0; c]; c];
        for m in &per_run {
            for (r, row) in m.confusion_matrix.iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    pooled.confusion_matrix[r][k] += v;
                }
            }
        }
        write_confusion_csv(&layout.path(CONFUSION), &pooled, &prepared.class_names)?;
        artifacts.push(FOLDS_CSV.to_string());
        json!({"mode": "kfold", "accuracy_mean": summary.accuracy.mean, "accuracy_std": summary.accuracy.std})
    } else {
        write_json(&layout.path(METRICS), &per_run[0])?;
        write_confusion_csv(&layout.path(CONFUSION), &per_run[0], &prepared.class_names)?;
        json!({"mode": "holdout", "accuracy": per_run[0].accuracy})
    };
    artifacts.push(METRICS.to_string());
    artifacts.push(CONFUSION.to_string());
    layout.write_manifest("evaluate", &train_hash, Some(&train_hash), &artifacts, details)
}
