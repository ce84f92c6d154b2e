//! Per-stage config hashes. Each hash covers the settings that shape the
//! stage's artifacts plus the hash of the stage it builds on.

use serde_json::json;

use crate::config::{file_sha256, value_hash, EmbeddingSource, ExperimentConfig, Task};
use crate::error::Result;

pub fn prepare(cfg: &ExperimentConfig) -> Result<String> {
    let cleaning = cfg.cleaning_config()?;
    let task_options = match cfg.task {
        Task::Agency => serde_json::to_value(&cfg.agency).expect("json"),
        Task::Emotion => serde_json::to_value(&cfg.emotion).expect("json"),
    };
    Ok(value_hash(&json!({
        "stage": "prepare",
        "input": file_sha256(&cfg.paths.input)?,
        "task": cfg.task,
        "task_options": task_options,
        "columns": cfg.columns,
        "stopwords": cleaning.stopwords,
        "noise_tokens": cleaning.noise_tokens,
        "cleaning": cfg.cleaning,
        "seq_len": cfg.seq_len,
        "vocab_min_count": cfg.vocab_min_count,
        "seed": cfg.seed,
    })))
}

pub fn embed(cfg: &ExperimentConfig) -> Result<String> {
    let source = match cfg.embedding_source {
        EmbeddingSource::TrainWord2vec => json!({"train_word2vec": cfg.word2vec}),
        EmbeddingSource::LoadPretrained => {
            let p = cfg.paths.embeddings.as_ref().expect("validated");
            json!({"load_pretrained": file_sha256(p)?})
        }
    };
    Ok(value_hash(&json!({
        "stage": "embed",
        "prepare": prepare(cfg)?,
        "source": source,
        "oov": cfg.oov,
        "dim": cfg.model.dim(),
    })))
}

pub fn train(cfg: &ExperimentConfig) -> Result<String> {
    Ok(value_hash(&json!({
        "stage": "train",
        "embed": embed(cfg)?,
        "model": cfg.model,
        "split": cfg.split,
        "train": cfg.train,
        "seed": cfg.seed,
    })))
}
