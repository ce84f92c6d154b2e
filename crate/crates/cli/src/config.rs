//! The experiment config file and `--set key=value` overrides.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use feedback_core::corpus::{load_token_list, CleaningConfig, ColumnMapping};
use feedback_core::embeddings::{OovPolicy, Word2VecConfig};
use feedback_core::models::ModelConfig;
use feedback_core::training::{SplitSpec, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub input: PathBuf,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default)]
    pub noise_tokens: Option<PathBuf>,
    /// Pretrained `.vec` (or binary cache) for `load_pretrained`.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Agency,
    Emotion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    TrainWord2vec,
    LoadPretrained,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgencyOptions {
    /// Keep only the `top_k` most frequent agencies.
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmotionOptions {
    pub per_class: usize,
    pub max_tokens: usize,
}

impl Default for EmotionOptions {
    fn default() -> Self {
        EmotionOptions {
            per_class: 10_000,
            max_tokens: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningOptions {
    /// Start from the built-in stopword and noise lists; files in `paths`
    /// are added on top.
    pub default_lists: bool,
    pub latin_ratio_threshold: f64,
    pub lowercase: bool,
}

impl Default for CleaningOptions {
    fn default() -> Self {
        CleaningOptions {
            default_lists: true,
            latin_ratio_threshold: 0.5,
            lowercase: true,
        }
    }
}

fn default_seq_len() -> usize {
    255
}

fn default_min_count() -> u64 {
    1
}

fn default_split() -> SplitSpec {
    SplitSpec::holdout(0.7, 0.1, 0.2, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: Paths,
    pub task: Task,
    #[serde(default)]
    pub columns: ColumnMapping,
    #[serde(default)]
    pub agency: AgencyOptions,
    #[serde(default)]
    pub emotion: EmotionOptions,
    #[serde(default)]
    pub cleaning: CleaningOptions,
    #[serde(default = "default_seq_len")]
    pub seq_len: usize,
    #[serde(default = "default_min_count")]
    pub vocab_min_count: u64,
    pub embedding_source: EmbeddingSource,
    #[serde(default)]
    pub word2vec: Word2VecConfig,
    #[serde(default)]
    pub oov: OovPolicy,
    /// `vocab_size`, `seq_len` and `num_classes` are filled in from the
    /// prepared data; the values given here are ignored.
    pub model: ModelConfig,
    #[serde(default = "default_split")]
    pub split: SplitSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
}

/// Sets a dotted key inside a JSON document, creating objects as needed.
/// The value is parsed as JSON when possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{assignment}` is not key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Usage(format!("bad override key `{key}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            _ => {
                return Err(CliError::Usage(format!(
                    "override `{key}`: `{}` is not an object",
                    parts[..i].join(".")
                )))
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("key has at least one part")
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    /// Reads the config, applies overrides, resolves relative paths against
    /// the config file's directory and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut doc: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        // pretrained vectors stay frozen unless the config says otherwise
        if doc["embedding_source"] == "load_pretrained" {
            if let Some(model) = doc.get_mut("model").and_then(Value::as_object_mut) {
                model.entry("embedding_trainable").or_insert(Value::Bool(false));
            }
        }
        let mut cfg: ExperimentConfig =
            serde_json::from_value(doc).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.paths;
        resolve(base, &mut p.input);
        resolve(base, &mut p.output_dir);
        for x in [&mut p.stopwords, &mut p.noise_tokens, &mut p.embeddings].into_iter().flatten() {
            resolve(base, x);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let must_exist = |what: &str, p: &Path| -> Result<()> {
            if p.exists() {
                Ok(())
            } else {
                Err(CliError::Config(format!("{what} {} does not exist", p.display())))
            }
        };
        must_exist("paths.input", &self.paths.input)?;
        if let Some(p) = &self.paths.stopwords {
            must_exist("paths.stopwords", p)?;
        }
        if let Some(p) = &self.paths.noise_tokens {
            must_exist("paths.noise_tokens", p)?;
        }
        match (self.embedding_source, &self.paths.embeddings) {
            (EmbeddingSource::LoadPretrained, None) => {
                return Err(CliError::Config(
                    "embedding_source load_pretrained needs paths.embeddings".into(),
                ))
            }
            (EmbeddingSource::LoadPretrained, Some(p)) => must_exist("paths.embeddings", p)?,
            (EmbeddingSource::TrainWord2vec, _) => {
                self.word2vec.validate()?;
                if self.word2vec.dim != self.model.dim() {
                    return Err(CliError::Config(format!(
                        "word2vec.dim {} differs from model dim {}",
                        self.word2vec.dim,
                        self.model.dim()
                    )));
                }
            }
        }
        if self.seq_len == 0 {
            return Err(CliError::Config("seq_len must be ≥ 1".into()));
        }
        if self.task == Task::Emotion && self.emotion.per_class == 0 {
            return Err(CliError::Config("emotion.per_class must be ≥ 1".into()));
        }
        if self.agency.top_k == Some(0) || self.agency.top_k == Some(1) {
            return Err(CliError::Config("agency.top_k must be ≥ 2".into()));
        }
        self.split.validate()?;
        self.train.validate()?;
        // shape fields are provisional here; check the rest with placeholders
        let mut m = self.model.clone();
        m.set_task_shape(2, self.seq_len, 2);
        m.validate()?;
        self.cleaning_config()?.validate()?;
        Ok(())
    }

    pub fn cleaning_config(&self) -> Result<CleaningConfig> {
        let mut cfg = if self.cleaning.default_lists {
            CleaningConfig::default()
        } else {
            CleaningConfig::bare()
        };
        cfg.latin_ratio_threshold = self.cleaning.latin_ratio_threshold;
        cfg.lowercase = self.cleaning.lowercase;
        let extend = |set: &mut BTreeSet<String>, p: &Option<PathBuf>| -> Result<()> {
            if let Some(p) = p {
                set.extend(load_token_list(p)?);
            }
            Ok(())
        };
        extend(&mut cfg.stopwords, &self.paths.stopwords)?;
        extend(&mut cfg.noise_tokens, &self.paths.noise_tokens)?;
        Ok(cfg)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Hash of a serializable value through its canonical JSON form (object
/// keys sorted).
pub fn value_hash<S: Serialize>(v: &S) -> String {
    let value = serde_json::to_value(v).expect("config values serialize");
    sha256_hex(serde_json::to_string(&value).expect("json").as_bytes())
}
