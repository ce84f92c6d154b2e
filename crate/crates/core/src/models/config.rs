use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub seq_len: usize,
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub dense_units: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub embedding_trainable: bool,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            vocab_size: 2,
            dim: 300,
            seq_len: 255,
            conv1_filters: 300,
            conv1_kernel: 5,
            conv2_filters: 300,
            conv2_kernel: 4,
            dense_units: 300,
            dropout_rate: 0.5,
            num_classes: 2,
            embedding_trainable: true,
        }
    }
}

/// Direction layout of the second recurrent layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondLayer {
    /// Forward and backward LSTMs, both final states concatenated.
    #[default]
    Bidirectional,
    /// A single LSTM reading the sequence from the end.
    BackwardOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiLstmConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub seq_len: usize,
    pub spatial_dropout: f64,
    pub lstm1_units: usize,
    pub lstm2_units: usize,
    pub lstm2_dropout: f64,
    pub lstm2_recurrent_dropout: f64,
    pub second_layer: SecondLayer,
    pub dense_units: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub embedding_trainable: bool,
}

impl Default for BiLstmConfig {
    fn default() -> Self {
        BiLstmConfig {
            vocab_size: 2,
            dim: 300,
            seq_len: 255,
            spatial_dropout: 0.2,
            lstm1_units: 300,
            lstm2_units: 150,
            lstm2_dropout: 0.2,
            lstm2_recurrent_dropout: 0.2,
            second_layer: SecondLayer::Bidirectional,
            dense_units: 150,
            dropout_rate: 0.5,
            num_classes: 2,
            embedding_trainable: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cnn,
    Bilstm,
}

impl Architecture {
    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Cnn => "cnn",
            Architecture::Bilstm => "bilstm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "lowercase")]
pub enum ModelConfig {
    Cnn(CnnConfig),
    Bilstm(BiLstmConfig),
}

fn check_rate(name: &str, r: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Config(format!("{name} {r} outside [0, 1)")));
    }
    Ok(())
}

impl ModelConfig {
    pub fn architecture(&self) -> Architecture {
        match self {
            ModelConfig::Cnn(_) => Architecture::Cnn,
            ModelConfig::Bilstm(_) => Architecture::Bilstm,
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            ModelConfig::Cnn(c) => c.vocab_size,
            ModelConfig::Bilstm(c) => c.vocab_size,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelConfig::Cnn(c) => c.dim,
            ModelConfig::Bilstm(c) => c.dim,
        }
    }

    pub fn seq_len(&self) -> usize {
        match self {
            ModelConfig::Cnn(c) => c.seq_len,
            ModelConfig::Bilstm(c) => c.seq_len,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            ModelConfig::Cnn(c) => c.num_classes,
            ModelConfig::Bilstm(c) => c.num_classes,
        }
    }

    pub fn embedding_trainable(&self) -> bool {
        match self {
            ModelConfig::Cnn(c) => c.embedding_trainable,
            ModelConfig::Bilstm(c) => c.embedding_trainable,
        }
    }

    pub fn set_task_shape(&mut self, vocab_size: usize, seq_len: usize, num_classes: usize) {
        match self {
            ModelConfig::Cnn(c) => {
                c.vocab_size = vocab_size;
                c.seq_len = seq_len;
                c.num_classes = num_classes;
            }
            ModelConfig::Bilstm(c) => {
                c.vocab_size = vocab_size;
                c.seq_len = seq_len;
                c.num_classes = num_classes;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes() < 2 {
            return Err(Error::Config(format!("num_classes {} < 2", self.num_classes())));
        }
        if self.vocab_size() < 2 || self.dim() < 1 || self.seq_len() < 1 {
            return Err(Error::Config(format!(
                "vocab_size {}, dim {}, seq_len {} must be positive (vocab ≥ 2)",
                self.vocab_size(),
                self.dim(),
                self.seq_len()
            )));
        }
        match self {
            ModelConfig::Cnn(c) => {
                if c.conv1_kernel == 0 || c.conv2_kernel == 0 {
                    return Err(Error::Config("kernel sizes must be ≥ 1".into()));
                }
                if c.seq_len < c.conv1_kernel + c.conv2_kernel - 1 {
                    return Err(Error::Config(format!(
                        "seq_len {} too short for kernels {} and {}",
                        c.seq_len, c.conv1_kernel, c.conv2_kernel
                    )));
                }
                if c.conv1_filters == 0 || c.conv2_filters == 0 || c.dense_units == 0 {
                    return Err(Error::Config("layer widths must be ≥ 1".into()));
                }
                check_rate("dropout_rate", c.dropout_rate)
            }
            ModelConfig::Bilstm(c) => {
                if c.lstm1_units == 0 || c.lstm2_units == 0 || c.dense_units == 0 {
                    return Err(Error::Config("layer widths must be ≥ 1".into()));
                }
                check_rate("spatial_dropout", c.spatial_dropout)?;
                check_rate("lstm2_dropout", c.lstm2_dropout)?;
                check_rate("lstm2_recurrent_dropout", c.lstm2_recurrent_dropout)?;
                check_rate("dropout_rate", c.dropout_rate)
            }
        }
    }
}
