//! Text normalization, Latin filtering, tokenization and token filtering.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::vocab::{PAD_TOKEN, UNK_TOKEN};

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const DEFAULT_NOISE: &str = include_str!("../../data/noise_tokens.txt");

/// Typographic characters stripped in addition to ASCII punctuation.
const EXTRA_STRIP: &[char] = &[
    '«', '»', '“', '”', '„', '‘', '’', '…', '–', '—', '№', '•', '·', '°', '×', '¡', '¿',
];

#[derive(Debug, Clone, PartialEq)]
pub struct CleaningConfig {
    pub stopwords: BTreeSet<String>,
    pub noise_tokens: BTreeSet<String>,
    pub strip_chars: BTreeSet<char>,
    pub latin_ratio_threshold: f64,
    pub lowercase: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            stopwords: parse_token_list(DEFAULT_STOPWORDS),
            noise_tokens: parse_token_list(DEFAULT_NOISE),
            strip_chars: default_strip_chars(),
            latin_ratio_threshold: 0.5,
            lowercase: true,
        }
    }
}

impl CleaningConfig {
    /// No stopwords or noise tokens; only the character rules apply.
    pub fn bare() -> Self {
        CleaningConfig {
            stopwords: BTreeSet::new(),
            noise_tokens: BTreeSet::new(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.latin_ratio_threshold) {
            return Err(Error::Config(format!(
                "latin_ratio_threshold {} outside [0, 1]",
                self.latin_ratio_threshold
            )));
        }
        for reserved in [PAD_TOKEN, UNK_TOKEN] {
            if self.stopwords.contains(reserved) || self.noise_tokens.contains(reserved) {
                return Err(Error::Config(format!(
                    "reserved token `{reserved}` may not appear in stopword or noise lists"
                )));
            }
        }
        Ok(())
    }
}

pub fn default_strip_chars() -> BTreeSet<char> {
    (0u8..128)
        .map(char::from)
        .filter(char::is_ascii_punctuation)
        .chain(EXTRA_STRIP.iter().copied())
        .collect()
}

/// One token per line; blank lines and `#` comments are ignored.
pub fn parse_token_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn load_token_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_token_list(&text))
}

pub fn normalize_text(raw: &str, config: &CleaningConfig) -> String {
    let lowered;
    let text = if config.lowercase {
        lowered = raw.to_lowercase();
        lowered.as_str()
    } else {
        raw
    };
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if config.strip_chars.contains(&c) {
            continue;
        }
        if c.is_whitespace() || c.is_control() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
    }
    out
}

fn is_cyrillic(c: char) -> bool {
    matches!(c, '\u{0400}'..='\u{052F}' | '\u{1C80}'..='\u{1C8F}' | '\u{2DE0}'..='\u{2DFF}' | '\u{A640}'..='\u{A69F}')
}

/// Share of Cyrillic letters among all alphabetic characters, or `None`
/// when the text has no letters at all.
pub fn cyrillic_ratio(text: &str) -> Option<f64> {
    let (mut cyr, mut alpha) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        alpha += 1;
        if is_cyrillic(c) {
            cyr += 1;
        }
    }
    (alpha > 0).then(|| cyr as f64 / alpha as f64)
}

pub fn is_cyrillic_dominant(text: &str, threshold: f64) -> bool {
    cyrillic_ratio(text).is_some_and(|r| r >= threshold)
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

pub fn filter_tokens(tokens: Vec<String>, config: &CleaningConfig) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !config.stopwords.contains(t) && !config.noise_tokens.contains(t))
        .collect()
}
