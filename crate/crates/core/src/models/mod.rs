//! The two classifiers.
//!
//! CNN: embedding → conv1d(relu) → conv1d(relu) → global max pool →
//! dense(relu) → dropout → dense → softmax.
//!
//! BiLSTM: embedding → spatial dropout → BiLSTM (sequences) → BiLSTM
//! (final states, input/recurrent dropout) → dense(relu) → dropout →
//! dense → softmax.

mod checkpoint;
mod config;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointInfo, TrainingMeta};
pub use config::{Architecture, BiLstmConfig, CnnConfig, ModelConfig, SecondLayer};

use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::tensor::{
    glorot_uniform, Activation, BiLstmOptions, Graph, LstmParams, Mode, NodeId, ParamId, ParamStore, Real,
    Tensor,
};

pub const EMBEDDING_PARAM: &str = "embedding";

#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    params: ParamStore<T>,
}

fn layer_seed(seed: u64, layer: u64) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add(layer.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn add_lstm<T: Real>(store: &mut ParamStore<T>, rng: &mut ChaCha8Rng, prefix: &str, input: usize, hidden: usize) {
    store.add(
        format!("{prefix}.w_ih"),
        glorot_uniform(rng, vec![4 * hidden, input], input, 4 * hidden),
        true,
    );
    store.add(
        format!("{prefix}.w_hh"),
        glorot_uniform(rng, vec![4 * hidden, hidden], hidden, 4 * hidden),
        true,
    );
    // Gate order [i, f, g, o]; forget gate starts at 1.
    let bias = Tensor::from_fn(vec![4 * hidden], |i| {
        if (hidden..2 * hidden).contains(&i) {
            T::one()
        } else {
            T::zero()
        }
    });
    store.add(format!("{prefix}.bias"), bias, true);
}

fn add_dense<T: Real>(store: &mut ParamStore<T>, rng: &mut ChaCha8Rng, prefix: &str, n: usize, m: usize) {
    store.add(format!("{prefix}.weight"), glorot_uniform(rng, vec![n, m], n, m), true);
    store.add(format!("{prefix}.bias"), Tensor::zeros(vec![m]), true);
}

impl<T: Real> Model<T> {
    /// Assembles a model with freshly initialized weights around `embedding`.
    pub fn build(config: ModelConfig, embedding: &EmbeddingMatrix, init_seed: u64) -> Result<Self> {
        config.validate()?;
        if embedding.rows() != config.vocab_size() || embedding.dim() != config.dim() {
            return Err(Error::shape(
                "build model",
                format!(
                    "embedding is {}×{}, config expects {}×{}",
                    embedding.rows(),
                    embedding.dim(),
                    config.vocab_size(),
                    config.dim()
                ),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let mut store = ParamStore::new();
        store.add(EMBEDDING_PARAM, embedding.to_tensor(), config.embedding_trainable());
        let d = config.dim();
        match &config {
            ModelConfig::Cnn(c) => {
                let (k1, k2) = (c.conv1_kernel, c.conv2_kernel);
                store.add(
                    "conv1.kernel",
                    glorot_uniform(&mut rng, vec![c.conv1_filters, k1, d], k1 * d, k1 * c.conv1_filters),
                    true,
                );
                store.add("conv1.bias", Tensor::zeros(vec![c.conv1_filters]), true);
                store.add(
                    "conv2.kernel",
                    glorot_uniform(
                        &mut rng,
                        vec![c.conv2_filters, k2, c.conv1_filters],
                        k2 * c.conv1_filters,
                        k2 * c.conv2_filters,
                    ),
                    true,
                );
                store.add("conv2.bias", Tensor::zeros(vec![c.conv2_filters]), true);
                add_dense(&mut store, &mut rng, "dense", c.conv2_filters, c.dense_units);
                add_dense(&mut store, &mut rng, "output", c.dense_units, c.num_classes);
            }
            ModelConfig::Bilstm(c) => {
                add_lstm(&mut store, &mut rng, "lstm1.fwd", d, c.lstm1_units);
                add_lstm(&mut store, &mut rng, "lstm1.bwd", d, c.lstm1_units);
                let width2 = match c.second_layer {
                    SecondLayer::Bidirectional => {
                        add_lstm(&mut store, &mut rng, "lstm2.fwd", 2 * c.lstm1_units, c.lstm2_units);
                        add_lstm(&mut store, &mut rng, "lstm2.bwd", 2 * c.lstm1_units, c.lstm2_units);
                        2 * c.lstm2_units
                    }
                    SecondLayer::BackwardOnly => {
                        add_lstm(&mut store, &mut rng, "lstm2.bwd", 2 * c.lstm1_units, c.lstm2_units);
                        c.lstm2_units
                    }
                };
                add_dense(&mut store, &mut rng, "dense", width2, c.dense_units);
                add_dense(&mut store, &mut rng, "output", c.dense_units, c.num_classes);
            }
        }
        Ok(Model { config, params: store })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture()
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    fn id(&self, name: &str) -> ParamId {
        self.params
            .find(name)
            .unwrap_or_else(|| panic!("model is missing parameter `{name}`"))
    }

    /// Scalar parameter count; the embedding table is included only on request.
    pub fn param_count(&self, include_embedding: bool) -> usize {
        self.params
            .iter()
            .filter(|(_, p)| include_embedding || p.name != EMBEDDING_PARAM)
            .map(|(_, p)| p.value.numel())
            .sum()
    }

    fn lstm_nodes(&self, g: &mut Graph<'_, T>, prefix: &str) -> LstmParams {
        LstmParams {
            w_ih: g.param(self.id(&format!("{prefix}.w_ih"))),
            w_hh: g.param(self.id(&format!("{prefix}.w_hh"))),
            bias: g.param(self.id(&format!("{prefix}.bias"))),
        }
    }

    fn dense_layer(&self, g: &mut Graph<'_, T>, x: NodeId, prefix: &str, act: Activation) -> Result<NodeId> {
        let w = g.param(self.id(&format!("{prefix}.weight")));
        let b = g.param(self.id(&format!("{prefix}.bias")));
        g.dense(x, w, b, act)
    }

    /// Records the forward pass for a batch of `batch` sequences (`ids` is
    /// batch × seq_len, row-major) and returns the B×C probability node.
    pub fn forward(&self, g: &mut Graph<'_, T>, ids: &[usize], batch: usize, mode: Mode, seed: u64) -> Result<NodeId> {
        let len = self.config.seq_len();
        if ids.len() != batch * len {
            return Err(Error::shape(
                "model forward",
                format!("{} ids for batch {batch} × seq_len {len}", ids.len()),
            ));
        }
        let table = g.param(self.id(EMBEDDING_PARAM));
        let emb = g.embedding(table, ids, batch, len)?;
        let hidden = match &self.config {
            ModelConfig::Cnn(c) => {
                let k1 = g.param(self.id("conv1.kernel"));
                let b1 = g.param(self.id("conv1.bias"));
                let h = g.conv1d(emb, k1, b1, Activation::Relu)?;
                let k2 = g.param(self.id("conv2.kernel"));
                let b2 = g.param(self.id("conv2.bias"));
                let h = g.conv1d(h, k2, b2, Activation::Relu)?;
                let h = g.global_max_pool1d(h)?;
                let h = self.dense_layer(g, h, "dense", Activation::Relu)?;
                g.dropout(h, c.dropout_rate, mode, layer_seed(seed, 1))?
            }
            ModelConfig::Bilstm(c) => {
                let h = g.spatial_dropout1d(emb, c.spatial_dropout, mode, layer_seed(seed, 1))?;
                let f1 = self.lstm_nodes(g, "lstm1.fwd");
                let b1 = self.lstm_nodes(g, "lstm1.bwd");
                let h = g.bilstm(
                    h,
                    f1,
                    b1,
                    BiLstmOptions {
                        return_sequences: true,
                        dropout: 0.0,
                        recurrent_dropout: 0.0,
                        mode,
                        seed: layer_seed(seed, 2),
                    },
                )?;
                let opts = BiLstmOptions {
                    return_sequences: false,
                    dropout: c.lstm2_dropout,
                    recurrent_dropout: c.lstm2_recurrent_dropout,
                    mode,
                    seed: layer_seed(seed, 3),
                };
                let h = match c.second_layer {
                    SecondLayer::Bidirectional => {
                        let f2 = self.lstm_nodes(g, "lstm2.fwd");
                        let b2 = self.lstm_nodes(g, "lstm2.bwd");
                        g.bilstm(h, f2, b2, opts)?
                    }
                    SecondLayer::BackwardOnly => {
                        let b2 = self.lstm_nodes(g, "lstm2.bwd");
                        g.recurrent(h, &[(b2, true)], opts)?
                    }
                };
                let h = self.dense_layer(g, h, "dense", Activation::Relu)?;
                g.dropout(h, c.dropout_rate, mode, layer_seed(seed, 4))?
            }
        };
        let logits = self.dense_layer(g, hidden, "output", Activation::Identity)?;
        g.activation(logits, Activation::Softmax)
    }

    /// Infer-mode probabilities as a B×C tensor.
    pub fn predict(&self, ids: &[usize], batch: usize) -> Result<Tensor<T>> {
        let mut g = Graph::new(&self.params);
        let probs = self.forward(&mut g, ids, batch, Mode::Infer, 0)?;
        Ok(g.tensor(probs))
    }

    /// Same architecture and weights in another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        let mut params = ParamStore::new();
        for (_, p) in self.params.iter() {
            params.add(p.name.clone(), p.value.cast(), p.trainable);
        }
        Model {
            config: self.config.clone(),
            params,
        }
    }

    /// Copies parameter values by name from `values`; every model parameter
    /// must be present with the right shape.
    pub(crate) fn load_values(&mut self, values: Vec<(String, Tensor<T>)>) -> Result<()> {
        let mut seen = vec![false; self.params.len()];
        for (name, t) in values {
            let id = self
                .params
                .find(&name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor `{name}`")))?;
            let p = self.params.get_mut(id);
            if p.value.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, model expects {:?}",
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t;
            seen[id.index()] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            let name = &self.params.get(ParamId(i)).name;
            return Err(Error::Checkpoint(format!("missing tensor `{name}`")));
        }
        Ok(())
    }
}

/// Deterministic probe batch used to verify checkpoints: one all-PAD row and
/// one row cycling through the vocabulary.
pub(crate) fn probe_ids(vocab_size: usize, seq_len: usize) -> Vec<usize> {
    let mut ids = vec![0; seq_len];
    ids.extend((0..seq_len).map(|t| (t * 7 + 3) % vocab_size));
    ids
}
