//! ingest → normalize → Latin filter → tokenize → filter → label →
//! (subsample) → vocabulary → encode.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use feedback_core::corpus::{
    balance_subsample, build_vocabulary, clean_tokens, encode_example, ingest_path, is_cyrillic_dominant,
    map_emotion_label, write_rejects, EmotionLabel, EncodedExample, FeedbackRecord, Vocabulary,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{ExperimentConfig, Task};
use crate::error::{CliError, Result};
use crate::hashes;
use crate::manifest::{read_json, Layout};

pub const DATASET: &str = "dataset.jsonl";
pub const VOCAB: &str = "vocab.json";
pub const CLASSES: &str = "classes.json";
pub const CORPUS_TOKENS: &str = "corpus_tokens.jsonl";
pub const REJECTS: &str = "rejects.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreparedRow {
    pub id: String,
    pub label: usize,
    pub length_unpadded: usize,
    pub ids: Vec<usize>,
}

pub struct Prepared {
    pub class_names: Vec<String>,
    pub ids: Vec<String>,
    pub examples: Vec<EncodedExample>,
    pub vocab: Vocabulary,
}

impl Prepared {
    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
struct StageCounts {
    ingested_rows: usize,
    rejected_rows: usize,
    records: usize,
    cyrillic_dominant: usize,
    non_empty_tokens: usize,
    labeled: usize,
    selected: usize,
}

/// Class names and per-record labels for the configured task.
fn assign_labels(cfg: &ExperimentConfig, records: &[&FeedbackRecord]) -> (Vec<String>, Vec<Option<usize>>) {
    match cfg.task {
        Task::Emotion => {
            let names = EmotionLabel::CLASSES.iter().map(|s| s.to_string()).collect();
            let labels = records.iter().map(|r| map_emotion_label(r.feedback_type).class_index()).collect();
            (names, labels)
        }
        Task::Agency => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for r in records {
                let a = r.agency.trim();
                if !a.is_empty() {
                    *counts.entry(a).or_default() += 1;
                }
            }
            let mut order: Vec<(&str, usize)> = counts.into_iter().collect();
            order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            if let Some(k) = cfg.agency.top_k {
                order.truncate(k);
            }
            let names: Vec<String> = order.iter().map(|(n, _)| n.to_string()).collect();
            let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
            let labels = records.iter().map(|r| index.get(r.agency.trim()).copied()).collect();
            (names, labels)
        }
    }
}

fn write_lines<I, S>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Serialize,
{
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in rows {
        serde_json::to_writer(&mut w, &r).expect("row serializes");
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CliError::BadArtifact {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    let hash = hashes::prepare(cfg)?;
    let layout = Layout::new(&cfg.paths.output_dir)?;
    let cleaning = cfg.cleaning_config()?;
    let ingested = ingest_path(&cfg.paths.input, &cfg.columns)?;
    let mut counts = StageCounts {
        ingested_rows: ingested.rows(),
        rejected_rows: ingested.rejects.len(),
        records: ingested.records.len(),
        ..Default::default()
    };
    write_rejects(&layout.path(REJECTS), &ingested.rejects)?;

    let dominant: Vec<&FeedbackRecord> = ingested
        .records
        .iter()
        .filter(|r| is_cyrillic_dominant(&r.text, cleaning.latin_ratio_threshold))
        .collect();
    counts.cyrillic_dominant = dominant.len();
    let mut kept = Vec::new();
    let mut tokens = Vec::new();
    for r in dominant {
        let t = clean_tokens(&r.text, &cleaning);
        if !t.is_empty() {
            kept.push(r);
            tokens.push(t);
        }
    }
    counts.non_empty_tokens = kept.len();
    write_lines(&layout.path(CORPUS_TOKENS), &tokens)?;

    let (class_names, labels) = assign_labels(cfg, &kept);
    counts.labeled = labels.iter().filter(|l| l.is_some()).count();
    let selected: Vec<usize> = match cfg.task {
        Task::Emotion => {
            let lens: Vec<usize> = tokens.iter().map(Vec::len).collect();
            let (sel, draws) = balance_subsample(
                &labels,
                &lens,
                &class_names,
                cfg.emotion.per_class,
                cfg.emotion.max_tokens,
                cfg.seed,
            )?;
            for d in draws {
                log::info!(
                    "class {}: {} eligible, {} selected",
                    class_names[d.class],
                    d.eligible,
                    d.selected
                );
            }
            sel
        }
        Task::Agency => (0..kept.len()).filter(|&i| labels[i].is_some()).collect(),
    };
    counts.selected = selected.len();
    if selected.is_empty() {
        return Err(feedback_core::Error::Empty("prepared dataset has no examples".into()).into());
    }
    let vocab = build_vocabulary(selected.iter().map(|&i| &tokens[i]), cfg.vocab_min_count)?;
    let mut class_counts = vec![0usize; class_names.len()];
    let rows: Vec<PreparedRow> = selected
        .iter()
        .map(|&i| {
            let label = labels[i].expect("selected rows are labeled");
            class_counts[label] += 1;
            let ex = encode_example(&tokens[i], &vocab, cfg.seq_len, label);
            PreparedRow {
                id: kept[i].id.clone(),
                label,
                length_unpadded: ex.length_unpadded,
                ids: ex.ids,
            }
        })
        .collect();
    write_lines(&layout.path(DATASET), &rows)?;
    feedback_core::training::write_json(&layout.path(VOCAB), &vocab)?;
    feedback_core::training::write_json(&layout.path(CLASSES), &class_names)?;
    log::info!(
        "prepared {} examples in {} classes, vocabulary {}",
        rows.len(),
        class_names.len(),
        vocab.len()
    );
    let artifacts: Vec<String> = [DATASET, VOCAB, CLASSES, CORPUS_TOKENS, REJECTS].map(String::from).to_vec();
    let class_table: BTreeMap<&str, usize> =
        class_names.iter().map(String::as_str).zip(class_counts.iter().copied()).collect();
    layout.write_manifest(
        "prepare",
        &hash,
        None,
        &artifacts,
        json!({
            "counts": counts,
            "class_names": class_names,
            "class_counts": class_table,
            "examples": rows.len(),
            "vocab_size": vocab.len(),
            "vocab_hash": vocab.content_hash(),
            "seq_len": cfg.seq_len,
        }),
    )
}

/// Loads the prepared dataset after checking the prepare manifest.
pub fn load(cfg: &ExperimentConfig, layout: &Layout) -> Result<Prepared> {
    layout.require("prepare", &hashes::prepare(cfg)?)?;
    let rows: Vec<PreparedRow> = read_lines(&layout.path(DATASET))?;
    let vocab: Vocabulary = read_json(&layout.path(VOCAB))?;
    let class_names: Vec<String> = read_json(&layout.path(CLASSES))?;
    let (ids, examples) = rows
        .into_iter()
        .map(|r| {
            (
                r.id,
                EncodedExample {
                    ids: r.ids,
                    label: r.label,
                    length_unpadded: r.length_unpadded,
                },
            )
        })
        .unzip();
    Ok(Prepared {
        class_names,
        ids,
        examples,
        vocab,
    })
}
