//! Word-vector files.
//!
//! Text `.vec`: a header line `V D`, then V lines of `token v1 … vD`
//! separated by single spaces.
//!
//! Binary cache (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "FBVEC\0\0\x01"
//! rows    u64
//! dim     u64
//! tokens  rows × (u32 byte length, UTF-8 bytes)
//! values  rows·dim × f32
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

const BIN_MAGIC: &[u8; 8] = b"FBVEC\0\0\x01";

fn parse_err(path: &Path, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message,
    }
}

/// Reads a `.vec` file. Duplicate tokens are logged and only the first
/// occurrence is kept.
pub fn load_vec(path: &Path) -> Result<(Vec<String>, EmbeddingMatrix)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(parse_err(path, "missing header line".into())),
    };
    let mut parts = header.split_ascii_whitespace();
    let (Some(v), Some(d), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(parse_err(path, format!("header `{header}` is not `V D`")));
    };
    let expected: usize = v.parse().map_err(|_| parse_err(path, format!("bad row count `{v}`")))?;
    let dim: usize = d.parse().map_err(|_| parse_err(path, format!("bad dimension `{d}`")))?;

    let mut tokens = Vec::with_capacity(expected);
    let mut values = Vec::with_capacity(expected * dim);
    let mut seen = HashSet::with_capacity(expected);
    let mut rows_read = 0usize;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows_read += 1;
        let line_no = i + 2;
        let mut fields = line.split_ascii_whitespace();
        let token = fields.next().expect("non-empty line");
        let start = values.len();
        for f in fields {
            let x: f32 = f
                .parse()
                .map_err(|_| parse_err(path, format!("line {line_no}: non-numeric field `{f}`")))?;
            values.push(x);
        }
        let got = values.len() - start;
        if got != dim {
            return Err(parse_err(path, format!("line {line_no}: expected {dim} values, found {got}")));
        }
        if !seen.insert(token.to_string()) {
            log::warn!("{}: duplicate token `{token}` on line {line_no}, keeping first", path.display());
            values.truncate(start);
            continue;
        }
        tokens.push(token.to_string());
    }
    if rows_read != expected {
        return Err(parse_err(
            path,
            format!("header declares {expected} rows, file has {rows_read}"),
        ));
    }
    let rows = tokens.len();
    Ok((tokens, EmbeddingMatrix::new(rows, dim, values)?))
}

fn check_pair(tokens: &[String], matrix: &EmbeddingMatrix) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::Empty("vocabulary".into()));
    }
    if tokens.len() != matrix.rows() {
        return Err(Error::shape(
            "save_vec",
            format!("{} tokens for {} rows", tokens.len(), matrix.rows()),
        ));
    }
    if let Some(t) = tokens.iter().find(|t| t.is_empty() || t.contains(char::is_whitespace)) {
        return Err(Error::Config(format!("token `{t}` cannot be written to a .vec file")));
    }
    if let Some(i) = matrix.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("row {} of `{}`", i / matrix.dim(), tokens[i / matrix.dim()])));
    }
    Ok(())
}

pub fn save_vec(path: &Path, tokens: &[String], matrix: &EmbeddingMatrix) -> Result<()> {
    check_pair(tokens, matrix)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", matrix.rows(), matrix.dim()).map_err(io)?;
    for (i, tok) in tokens.iter().enumerate() {
        w.write_all(tok.as_bytes()).map_err(io)?;
        for v in matrix.row(i) {
            // `Display` for f32 prints the shortest representation that parses back exactly.
            write!(w, " {v}").map_err(io)?;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn save_vec_binary(path: &Path, tokens: &[String], matrix: &EmbeddingMatrix) -> Result<()> {
    check_pair(tokens, matrix)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(BIN_MAGIC).map_err(io)?;
    w.write_all(&(matrix.rows() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(matrix.dim() as u64).to_le_bytes()).map_err(io)?;
    for t in tokens {
        w.write_all(&(t.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(t.as_bytes()).map_err(io)?;
    }
    for v in matrix.values() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_vec_binary(path: &Path) -> Result<(Vec<String>, EmbeddingMatrix)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let trunc = |e: std::io::Error| parse_err(path, format!("truncated binary vector file: {e}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(trunc)?;
    if &magic != BIN_MAGIC {
        return Err(parse_err(path, "not a binary vector file (bad magic)".into()));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(trunc)?;
    let rows = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf).map_err(trunc)?;
    let dim = u64::from_le_bytes(u64buf) as usize;
    let mut tokens = Vec::with_capacity(rows);
    let mut u32buf = [0u8; 4];
    for _ in 0..rows {
        r.read_exact(&mut u32buf).map_err(trunc)?;
        let mut bytes = vec![0u8; u32::from_le_bytes(u32buf) as usize];
        r.read_exact(&mut bytes).map_err(trunc)?;
        tokens.push(String::from_utf8(bytes).map_err(|_| parse_err(path, "token is not UTF-8".into()))?);
    }
    let mut raw = vec![0u8; rows * dim * 4];
    r.read_exact(&mut raw).map_err(trunc)?;
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((tokens, EmbeddingMatrix::new(rows, dim, values)?))
}
