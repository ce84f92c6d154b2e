//! Word vectors for the task vocabulary, trained or loaded.

use feedback_core::embeddings::{
    load_vec, load_vec_binary, project_checked, save_vec, save_vec_binary, train_word2vec_cbow, EmbeddingMatrix,
};
use serde_json::json;

use crate::config::{EmbeddingSource, ExperimentConfig};
use crate::error::Result;
use crate::hashes;
use crate::manifest::Layout;
use crate::prepare::{self, read_lines, CORPUS_TOKENS};

pub const VECTORS: &str = "embeddings.vec";
pub const VECTORS_BIN: &str = "embeddings.bin";
pub const TASK_EMBEDDING: &str = "task_embedding.bin";

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    let layout = Layout::new(&cfg.paths.output_dir)?;
    let prepared = prepare::load(cfg, &layout)?;
    let hash = hashes::embed(cfg)?;
    let (tokens, vectors, source_details) = match cfg.embedding_source {
        EmbeddingSource::TrainWord2vec => {
            let corpus: Vec<Vec<String>> = read_lines(&layout.path(CORPUS_TOKENS))?;
            let w2v = train_word2vec_cbow(&corpus, &cfg.word2vec)?;
            log::info!(
                "word2vec: {} tokens, epoch losses {:?}",
                w2v.vocab.len() - 2,
                w2v.epoch_losses
            );
            let (tokens, m) = w2v.corpus_vectors();
            (tokens, m, json!({"source": "train_word2vec", "epoch_losses": w2v.epoch_losses}))
        }
        EmbeddingSource::LoadPretrained => {
            let p = cfg.paths.embeddings.as_ref().expect("validated");
            let (tokens, m) = if p.extension().is_some_and(|e| e == "bin") {
                load_vec_binary(p)?
            } else {
                load_vec(p)?
            };
            (tokens, m, json!({"source": "load_pretrained"}))
        }
    };
    save_vec(&layout.path(VECTORS), &tokens, &vectors)?;
    save_vec_binary(&layout.path(VECTORS_BIN), &tokens, &vectors)?;
    let projection = project_checked(&tokens, &vectors, &prepared.vocab, &cfg.oov, cfg.model.dim())?;
    log::info!(
        "embedding coverage {:.4} ({} of {} corpus tokens)",
        projection.coverage,
        projection.found,
        prepared.vocab.len() - 2
    );
    save_vec_binary(
        &layout.path(TASK_EMBEDDING),
        prepared.vocab.tokens(),
        &projection.matrix,
    )?;
    layout.write_manifest(
        "embed",
        &hash,
        Some(&hashes::prepare(cfg)?),
        &[VECTORS, VECTORS_BIN, TASK_EMBEDDING].map(String::from),
        json!({
            "source": source_details,
            "source_rows": vectors.rows(),
            "dim": vectors.dim(),
            "coverage": projection.coverage,
            "found": projection.found,
            "vocab_size": prepared.vocab.len(),
        }),
    )
}

/// The projected task embedding after checking the embed manifest.
pub fn load(cfg: &ExperimentConfig, layout: &Layout) -> Result<EmbeddingMatrix> {
    layout.require("embed", &hashes::embed(cfg)?)?;
    let (_, m) = load_vec_binary(&layout.path(TASK_EMBEDDING))?;
    Ok(m)
}
