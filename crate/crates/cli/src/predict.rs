//! Class probabilities for new feedback.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use feedback_core::corpus::{clean_tokens, encode_sequence, ingest_path, ColumnMapping};
use feedback_core::models::load_checkpoint;
use feedback_core::training::{argmax, predict_proba};
use feedback_core::corpus::EncodedExample;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::hashes;
use crate::manifest::Layout;
use crate::prepare;
use crate::train::CHECKPOINT;

pub const PREDICTIONS: &str = "predictions.jsonl";

#[derive(Serialize)]
struct Prediction<'a> {
    id: &'a str,
    class: &'a str,
    probabilities: Vec<f32>,
}

/// `(id, text)` pairs: CSV/JSONL exports go through ingestion, anything else
/// is read as one feedback per non-empty line with 1-based line ids.
fn read_inputs(path: &Path, columns: &ColumnMapping) -> Result<Vec<(String, String)>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("csv") || ext.eq_ignore_ascii_case("jsonl") {
        let ing = ingest_path(path, columns)?;
        for r in &ing.rejects {
            log::warn!("input row {} skipped: {}", r.row, r.reason);
        }
        return Ok(ing.records.into_iter().map(|r| (r.id, r.text)).collect());
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| ((i + 1).to_string(), l.to_string()))
        .collect())
}

pub fn run(cfg: &ExperimentConfig, input: &Path, output: Option<&Path>) -> Result<()> {
    let layout = Layout::new(&cfg.paths.output_dir)?;
    let prepared = prepare::load(cfg, &layout)?;
    layout.require("train", &hashes::train(cfg)?)?;
    let (model, _) = load_checkpoint(
        &layout.path(CHECKPOINT),
        Some(cfg.model.architecture()),
        Some(&prepared.vocab.content_hash()),
    )?;
    let cleaning = cfg.cleaning_config()?;
    let inputs = read_inputs(input, &cfg.columns)?;
    let examples: Vec<EncodedExample> = inputs
        .iter()
        .map(|(_, text)| {
            let tokens = clean_tokens(text, &cleaning);
            EncodedExample {
                ids: encode_sequence(&tokens, &prepared.vocab, cfg.seq_len),
                label: 0,
                length_unpadded: tokens.len().min(cfg.seq_len),
            }
        })
        .collect();
    let probs = predict_proba(&model, &examples, cfg.train.batch_size)?;
    let out_path = output.map(Path::to_path_buf).unwrap_or_else(|| layout.path(PREDICTIONS));
    let f = fs::File::create(&out_path).map_err(|e| CliError::io(&out_path, e))?;
    let mut w = BufWriter::new(f);
    for ((id, _), p) in inputs.iter().zip(probs) {
        let row = Prediction {
            id,
            class: &prepared.class_names[argmax(&p)],
            probabilities: p,
        };
        serde_json::to_writer(&mut w, &row).expect("prediction serializes");
        w.write_all(b"\n").map_err(|e| CliError::io(&out_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&out_path, e))?;
    log::info!("wrote {} predictions to {}", inputs.len(), out_path.display());
    Ok(())
}
