//! Distribution tables for plotting.

use std::collections::BTreeMap;
use std::path::Path;

use feedback_core::corpus::{ingest_path, FeedbackType};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::hashes;
use crate::manifest::{read_json, Layout};
use crate::prepare::{read_lines, PreparedRow, CLASSES, DATASET};

pub const TYPES: &str = "report_types.csv";
pub const AGENCIES: &str = "report_agencies.csv";
pub const CLASS_TABLE: &str = "report_classes.csv";

fn write_table(path: &Path, header: &str, rows: &[(String, usize)]) -> Result<()> {
    let total: usize = rows.iter().map(|r| r.1).sum();
    let mut text = format!("{header},count,percent\n");
    for (name, n) in rows {
        let pct = if total == 0 { 0.0 } else { 100.0 * *n as f64 / total as f64 };
        let name = if name.contains([',', '"', '\n']) {
            format!("\"{}\"", name.replace('"', "\"\""))
        } else {
            name.clone()
        };
        text.push_str(&format!("{name},{n},{pct}\n"));
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Rows sorted by count, then name.
fn ranked(counts: BTreeMap<String, usize>) -> Vec<(String, usize)> {
    let mut rows: Vec<(String, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    rows
}

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    let layout = Layout::new(&cfg.paths.output_dir)?;
    let ing = ingest_path(&cfg.paths.input, &cfg.columns)?;
    let mut types: BTreeMap<String, usize> = FeedbackType::ALL.iter().map(|t| (t.to_string(), 0)).collect();
    let mut agencies = BTreeMap::new();
    for r in &ing.records {
        *types.entry(r.feedback_type.to_string()).or_default() += 1;
        let a = r.agency.trim();
        let a = if a.is_empty() { "(none)" } else { a };
        *agencies.entry(a.to_string()).or_default() += 1;
    }
    write_table(&layout.path(TYPES), "feedback_type", &ranked(types))?;
    write_table(&layout.path(AGENCIES), "agency", &ranked(agencies))?;
    let mut artifacts = vec![TYPES.to_string(), AGENCIES.to_string()];

    // class balance of the prepared dataset, when one matching this config exists
    if layout.require("prepare", &hashes::prepare(cfg)?).is_ok() {
        let names: Vec<String> = read_json(&layout.path(CLASSES))?;
        let rows: Vec<PreparedRow> = read_lines(&layout.path(DATASET))?;
        let mut counts = vec![0usize; names.len()];
        for r in rows {
            counts[r.label] += 1;
        }
        let table: Vec<(String, usize)> = names.into_iter().zip(counts).collect();
        write_table(&layout.path(CLASS_TABLE), "class", &table)?;
        artifacts.push(CLASS_TABLE.to_string());
    }
    layout.write_manifest(
        "report",
        &hashes::prepare(cfg)?,
        None,
        &artifacts,
        json!({"records": ing.records.len(), "rejected_rows": ing.rejects.len()}),
    )
}
