//! CSV and JSONL ingestion of raw feedback exports.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{FeedbackRecord, FeedbackType};
use crate::error::{Error, Result};

/// Header names for each record field in a CSV export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub id: String,
    pub text: String,
    pub feedback_type: String,
    pub agency: String,
    pub received_at: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            id: "id".into(),
            text: "text".into(),
            feedback_type: "type".into(),
            agency: "agency".into(),
            received_at: None,
        }
    }
}

/// A data row that could not be turned into a record. `row` is 1-based and
/// does not count the CSV header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub records: Vec<FeedbackRecord>,
    pub rejects: Vec<Reject>,
}

impl Ingested {
    pub fn rows(&self) -> usize {
        self.records.len() + self.rejects.len()
    }
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })
}

fn make_record(
    id: &str,
    text: &str,
    ty: &str,
    agency: &str,
    received_at: Option<&str>,
) -> Result<FeedbackRecord, String> {
    if text.trim().is_empty() {
        return Err("empty text".into());
    }
    let feedback_type: FeedbackType = ty.parse()?;
    Ok(FeedbackRecord {
        id: id.trim().to_string(),
        text: text.to_string(),
        feedback_type,
        agency: agency.trim().to_string(),
        received_at: received_at
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string),
    })
}

pub fn ingest_csv(path: &Path, mapping: &ColumnMapping) -> Result<Ingested> {
    let content = read_utf8(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(content.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let id_col = column(&mapping.id)?;
    let text_col = column(&mapping.text)?;
    let type_col = column(&mapping.feedback_type)?;
    let agency_col = column(&mapping.agency)?;
    let time_col = match &mapping.received_at {
        Some(name) => Some(column(name)?),
        None => None,
    };

    let mut out = Ingested::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                out.rejects.push(Reject {
                    row: row_no,
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        if row.len() != headers.len() {
            out.rejects.push(Reject {
                row: row_no,
                reason: format!("expected {} fields, found {}", headers.len(), row.len()),
            });
            continue;
        }
        let field = |c: usize| row.get(c).unwrap_or("");
        match make_record(
            field(id_col),
            field(text_col),
            field(type_col),
            field(agency_col),
            time_col.map(field),
        ) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.rejects.push(Reject { row: row_no, reason }),
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct JsonRow {
    #[serde(default)]
    id: Option<serde_json::Value>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default, rename = "type")]
    feedback_type: Option<String>,
    #[serde(default)]
    agency: Option<String>,
    #[serde(default)]
    received_at: Option<String>,
}

/// One JSON object per line with keys `id`, `text`, `type`, `agency`
/// (and optionally `received_at`). Blank lines are skipped.
pub fn ingest_jsonl(path: &Path) -> Result<Ingested> {
    let content = read_utf8(path)?;
    let mut out = Ingested::default();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row_no = i + 1;
        let row: JsonRow = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                out.rejects.push(Reject {
                    row: row_no,
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        let id = match row.id {
            Some(serde_json::Value::String(s)) => s,
            Some(v) => v.to_string(),
            None => row_no.to_string(),
        };
        match make_record(
            &id,
            row.text.as_deref().unwrap_or(""),
            row.feedback_type.as_deref().unwrap_or(""),
            row.agency.as_deref().unwrap_or(""),
            row.received_at.as_deref(),
        ) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.rejects.push(Reject { row: row_no, reason }),
        }
    }
    Ok(out)
}

/// Dispatches on extension: `.jsonl`/`.json` go through [`ingest_jsonl`],
/// everything else is read as CSV.
pub fn ingest_path(path: &Path, mapping: &ColumnMapping) -> Result<Ingested> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => ingest_jsonl(path),
        _ => ingest_csv(path, mapping),
    }
}

pub fn write_rejects(path: &Path, rejects: &[Reject]) -> Result<()> {
    let mut buf = Vec::new();
    for r in rejects {
        serde_json::to_writer(&mut buf, r).expect("reject serializes");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}
