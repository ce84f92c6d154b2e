//! Stage manifests and the artifact layout of an output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::file_sha256;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub upstream_hash: Option<String>,
    /// Artifact file name → sha256 of its contents.
    pub artifacts: BTreeMap<String, String>,
    pub details: Value,
}

pub struct Layout {
    pub dir: PathBuf,
}

impl Layout {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Layout { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn fold_dir(&self, fold: usize) -> Result<PathBuf> {
        let d = self.dir.join(format!("fold_{fold}"));
        fs::create_dir_all(&d).map_err(|e| CliError::io(&d, e))?;
        Ok(d)
    }

    fn manifest_path(&self, stage: &str) -> PathBuf {
        self.dir.join(format!("{stage}.manifest.json"))
    }

    /// Writes the manifest for `stage`, hashing each artifact (paths
    /// relative to the output directory).
    pub fn write_manifest(
        &self,
        stage: &str,
        config_hash: &str,
        upstream_hash: Option<&str>,
        artifacts: &[String],
        details: Value,
    ) -> Result<()> {
        let mut hashes = BTreeMap::new();
        for a in artifacts {
            hashes.insert(a.clone(), file_sha256(&self.path(a))?);
        }
        let m = Manifest {
            stage: stage.to_string(),
            config_hash: config_hash.to_string(),
            upstream_hash: upstream_hash.map(str::to_string),
            artifacts: hashes,
            details,
        };
        feedback_core::training::write_json(&self.manifest_path(stage), &m)?;
        Ok(())
    }

    /// Loads the manifest of an upstream stage and checks it was produced
    /// from the current config.
    pub fn require(&self, stage: &'static str, expected_hash: &str) -> Result<Manifest> {
        let path = self.manifest_path(stage);
        if !path.exists() {
            return Err(CliError::MissingPrerequisite {
                what: "stage manifest",
                stage,
                path,
            });
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::BadArtifact {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if m.config_hash != expected_hash {
            return Err(CliError::HashMismatch {
                stage,
                expected: expected_hash.to_string(),
                found: m.config_hash,
            });
        }
        for name in m.artifacts.keys() {
            let p = self.path(name);
            if !p.exists() {
                return Err(CliError::MissingPrerequisite {
                    what: "artifact",
                    stage,
                    path: p,
                });
            }
        }
        Ok(m)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
