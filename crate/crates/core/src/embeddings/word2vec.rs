//! CBOW word2vec with negative sampling.
//!
//! For every position the context words inside `window` on either side are
//! averaged into `v̄`; the center word's output vector `u_c` and `negatives`
//! sampled output vectors `u_n` are scored against it. Negatives come from the
//! unigram distribution raised to 0.75. Input vectors start uniform in
//! ±0.5/D, output vectors start at zero, and the learning rate decays
//! linearly to 1e-4 of its initial value over the whole run.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingMatrix;
use crate::corpus::{build_vocabulary, Vocabulary};
use crate::error::{Error, Result};
use crate::tensor::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Word2VecConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: u64,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample_threshold: f64,
    pub seed: u64,
    /// 1 gives a deterministic run; more threads update shared weights
    /// without locking and results vary between runs.
    pub threads: usize,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Word2VecConfig {
            dim: 300,
            window: 5,
            negatives: 10,
            epochs: 5,
            learning_rate: 0.05,
            min_count: 5,
            subsample_threshold: 0.0,
            seed: 1,
            threads: 1,
        }
    }
}

impl Word2VecConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("word2vec: {m}")));
        if self.dim < 1 {
            return bad("dim must be ≥ 1");
        }
        if self.window < 1 {
            return bad("window must be ≥ 1");
        }
        if self.negatives < 1 {
            return bad("negatives must be ≥ 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be ≥ 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if self.min_count < 1 {
            return bad("min_count must be ≥ 1");
        }
        if self.subsample_threshold < 0.0 {
            return bad("subsample_threshold must be ≥ 0");
        }
        Ok(())
    }
}

/// Trained input vectors bound to their vocabulary. Rows of the reserved
/// PAD/UNK ids are zero.
#[derive(Debug, Clone)]
pub struct Word2Vec {
    pub vocab: Vocabulary,
    pub vectors: EmbeddingMatrix,
    /// Mean loss per center prediction, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    /// Loss of the very first center prediction of the run.
    pub first_loss: f64,
}

impl Word2Vec {
    /// Corpus tokens (ids ≥ 2) with their vectors, ready for `save_vec`.
    pub fn corpus_vectors(&self) -> (Vec<String>, EmbeddingMatrix) {
        let tokens: Vec<String> = self.vocab.tokens()[2..].to_vec();
        let dim = self.vectors.dim();
        let values = self.vectors.values()[2 * dim..].to_vec();
        let m = EmbeddingMatrix::new(tokens.len(), dim, values).expect("finite trained vectors");
        (tokens, m)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn check_dims<T: Real>(center: &[T], context: &[T], negatives: &[&[T]]) -> Result<()> {
    let d = context.len();
    if center.len() != d || negatives.iter().any(|n| n.len() != d) {
        return Err(Error::shape(
            "negative_sampling_loss",
            format!(
                "context dim {d}, center dim {}, negative dims {:?}",
                center.len(),
                negatives.iter().map(|n| n.len()).collect::<Vec<_>>()
            ),
        ));
    }
    Ok(())
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// −ln σ(u_c·v̄) − Σₙ ln σ(−uₙ·v̄).
pub fn negative_sampling_loss<T: Real>(center: &[T], context_avg: &[T], negatives: &[&[T]]) -> Result<T> {
    check_dims(center, context_avg, negatives)?;
    let mut loss = softplus(-dot(center, context_avg).as_f64());
    for n in negatives {
        loss += softplus(dot(n, context_avg).as_f64());
    }
    Ok(T::lit(loss))
}

/// Gradients of [`negative_sampling_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSamplingGrads<T> {
    pub center: Vec<T>,
    pub context_avg: Vec<T>,
    pub negatives: Vec<Vec<T>>,
}

pub fn negative_sampling_grads<T: Real>(
    center: &[T],
    context_avg: &[T],
    negatives: &[&[T]],
) -> Result<NegativeSamplingGrads<T>> {
    check_dims(center, context_avg, negatives)?;
    let sig = |x: T| T::one() / (T::one() + (-x).exp());
    // d/ds softplus(−s) = σ(s) − 1, d/ds softplus(s) = σ(s).
    let gc = sig(dot(center, context_avg)) - T::one();
    let mut d_ctx: Vec<T> = center.iter().map(|&u| gc * u).collect();
    let d_center = context_avg.iter().map(|&v| gc * v).collect();
    let mut d_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let gn = sig(dot(n, context_avg));
        for (d, &u) in d_ctx.iter_mut().zip(n.iter()) {
            *d += gn * u;
        }
        d_negs.push(context_avg.iter().map(|&v| gn * v).collect());
    }
    Ok(NegativeSamplingGrads {
        center: d_center,
        context_avg: d_ctx,
        negatives: d_negs,
    })
}

/// f32 weights shared between training threads; relaxed atomics so that
/// concurrent unsynchronised updates stay well-defined.
struct SharedWeights(Vec<AtomicU32>);

impl SharedWeights {
    fn new(values: impl Iterator<Item = f32>) -> Self {
        SharedWeights(values.map(|v| AtomicU32::new(v.to_bits())).collect())
    }

    #[inline]
    fn get(&self, i: usize) -> f32 {
        f32::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, i: usize, delta: f32) {
        let v = self.get(i) + delta;
        self.0[i].store(v.to_bits(), Ordering::Relaxed);
    }

    fn into_vec(self) -> Vec<f32> {
        self.0.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    }
}

/// Inverse-CDF sampler over count^0.75 restricted to corpus ids.
struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(vocab: &Vocabulary) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..vocab.len())
            .map(|id| {
                if id >= 2 {
                    acc += (vocab.count(id) as f64).powf(0.75);
                }
                acc
            })
            .collect();
        NegativeTable { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

struct Trainer<'a> {
    cfg: &'a Word2VecConfig,
    vocab: &'a Vocabulary,
    input: SharedWeights,
    output: SharedWeights,
    table: NegativeTable,
    processed: AtomicU64,
    total_words: u64,
}

#[derive(Default)]
struct ChunkStats {
    loss: f64,
    predictions: u64,
    first_loss: Option<f64>,
}

impl Trainer<'_> {
    fn learning_rate(&self) -> f32 {
        let planned = (self.cfg.epochs as u64 * self.total_words + 1) as f64;
        let done = self.processed.load(Ordering::Relaxed) as f64;
        (self.cfg.learning_rate * (1.0 - done / planned).max(1e-4)) as f32
    }

    fn keep(&self, id: usize, rng: &mut ChaCha8Rng) -> bool {
        let t = self.cfg.subsample_threshold;
        if t <= 0.0 {
            return true;
        }
        let f = self.vocab.count(id) as f64;
        let tt = t * self.total_words as f64;
        let p = ((f / tt).sqrt() + 1.0) * tt / f;
        p >= 1.0 || rng.gen::<f64>() < p
    }

    fn train_chunk(&self, sentences: &[Vec<usize>], rng: &mut ChaCha8Rng) -> ChunkStats {
        let d = self.cfg.dim;
        let mut stats = ChunkStats::default();
        let mut h = vec![0f32; d];
        let mut err = vec![0f32; d];
        let mut kept = Vec::new();
        let mut context = Vec::new();
        for sentence in sentences {
            kept.clear();
            kept.extend(sentence.iter().copied().filter(|&id| self.keep(id, rng)));
            let lr = self.learning_rate();
            for pos in 0..kept.len() {
                let center = kept[pos];
                let lo = pos.saturating_sub(self.cfg.window);
                let hi = (pos + self.cfg.window + 1).min(kept.len());
                context.clear();
                context.extend((lo..hi).filter(|&j| j != pos).map(|j| kept[j]));
                if context.is_empty() {
                    continue;
                }
                let inv = 1.0 / context.len() as f32;
                h.iter_mut().for_each(|v| *v = 0.0);
                for &c in &context {
                    for (k, hv) in h.iter_mut().enumerate() {
                        *hv += self.input.get(c * d + k);
                    }
                }
                h.iter_mut().for_each(|v| *v *= inv);
                err.iter_mut().for_each(|v| *v = 0.0);

                let mut loss = 0.0f64;
                for n in 0..=self.cfg.negatives {
                    let (target, label) = if n == 0 {
                        (center, 1.0f32)
                    } else {
                        let mut t = self.table.sample(rng);
                        while t == center {
                            t = self.table.sample(rng);
                        }
                        (t, 0.0)
                    };
                    let base = target * d;
                    let f: f32 = (0..d).map(|k| h[k] * self.output.get(base + k)).sum();
                    loss += if label > 0.0 { softplus(-f as f64) } else { softplus(f as f64) };
                    let sig = 1.0 / (1.0 + (-f).exp());
                    let g = (label - sig) * lr;
                    for k in 0..d {
                        err[k] += g * self.output.get(base + k);
                        self.output.add(base + k, g * h[k]);
                    }
                }
                // dL/dv_c = dL/dv̄ / |context|
                for &c in &context {
                    for k in 0..d {
                        self.input.add(c * d + k, err[k] * inv);
                    }
                }
                stats.first_loss.get_or_insert(loss);
                stats.loss += loss;
                stats.predictions += 1;
            }
            self.processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
        }
        stats
    }
}

/// Trains CBOW vectors. Sentences never share context across boundaries.
pub fn train_word2vec_cbow<I, S>(corpus: I, config: &Word2VecConfig) -> Result<Word2Vec>
where
    I: IntoIterator,
    I::Item: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    config.validate()?;
    let docs: Vec<Vec<String>> = corpus
        .into_iter()
        .map(|s| s.into_iter().map(|t| t.as_ref().to_string()).collect())
        .collect();
    let vocab = build_vocabulary(docs.iter(), config.min_count)?;
    if vocab.is_empty() {
        return Err(Error::Empty(format!(
            "vocabulary after min_count {} filtering",
            config.min_count
        )));
    }
    if vocab.len() < 3 {
        return Err(Error::Config("word2vec needs at least two distinct tokens for negative sampling".into()));
    }
    let sentences: Vec<Vec<usize>> = docs
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t)).collect::<Vec<_>>())
        .filter(|s| s.len() > 1)
        .collect();
    let total_words: u64 = sentences.iter().map(|s| s.len() as u64).sum();

    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 0.5 / d as f32;
    let init: Vec<f32> = (0..vocab.len() * d)
        .map(|i| if i < 2 * d { 0.0 } else { rng.gen_range(-bound..bound) })
        .collect();
    let trainer = Trainer {
        cfg: config,
        vocab: &vocab,
        input: SharedWeights::new(init.into_iter()),
        output: SharedWeights::new(std::iter::repeat_n(0.0, vocab.len() * d)),
        table: NegativeTable::new(&vocab),
        processed: AtomicU64::new(0),
        total_words,
    };

    let threads = config.threads.max(1);
    let mut thread_rngs: Vec<ChaCha8Rng> = (0..threads)
        .map(|t| ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1 + t as u64)))
        .collect();
    let chunk = sentences.len().div_ceil(threads).max(1);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut first_loss = None;
    for epoch in 0..config.epochs {
        let stats: Vec<ChunkStats> = if threads == 1 {
            vec![trainer.train_chunk(&sentences, &mut thread_rngs[0])]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = sentences
                    .chunks(chunk)
                    .zip(thread_rngs.iter_mut())
                    .map(|(part, rng)| {
                        let tr = &trainer;
                        s.spawn(move || tr.train_chunk(part, rng))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("training thread")).collect()
            })
        };
        let (loss, n) = stats.iter().fold((0.0, 0u64), |(l, n), s| (l + s.loss, n + s.predictions));
        if epoch == 0 {
            first_loss = stats.iter().find_map(|s| s.first_loss);
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("word2vec loss in epoch {}", epoch + 1)));
        }
        let mean = if n > 0 { loss / n as f64 } else { 0.0 };
        log::info!("word2vec epoch {}: mean loss {:.5}", epoch + 1, mean);
        epoch_losses.push(mean);
    }
    let first_loss = first_loss.ok_or_else(|| Error::Empty("training windows (every sentence has < 2 tokens)".into()))?;
    let vectors = EmbeddingMatrix::new(vocab.len(), d, trainer.input.into_vec())?;
    Ok(Word2Vec {
        vocab,
        vectors,
        epoch_losses,
        first_loss,
    })
}
