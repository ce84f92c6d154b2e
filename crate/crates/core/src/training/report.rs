use std::fs;
use std::path::Path;

use serde::Serialize;

use super::metrics::Metrics;
use super::trainer::History;
use crate::error::{Error, Result};

pub fn write_history_csv(path: &Path, history: &History) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })?;
    let fail = |e: csv::Error| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    };
    for r in &history.epochs {
        w.serialize(r).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline; field order follows the type, so
/// equal values give byte-identical files.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Header row `true\pred` followed by class names; one row per true class.
pub fn write_confusion_csv(path: &Path, metrics: &Metrics, class_names: &[String]) -> Result<()> {
    let c = metrics.confusion_matrix.len();
    if class_names.len() != c {
        return Err(Error::shape(
            "confusion csv",
            format!("{} class names for a {c}×{c} matrix", class_names.len()),
        ));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })?;
    let fail = |e: csv::Error| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    };
    let mut header = vec!["true\\pred".to_string()];
    header.extend(class_names.iter().cloned());
    w.write_record(&header).map_err(fail)?;
    for (name, row) in class_names.iter().zip(&metrics.confusion_matrix) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
