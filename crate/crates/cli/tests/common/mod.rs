//! Synthetic corpora and experiment configs shared by the CLI tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use feedback_core::corpus::CleaningConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const CONSONANTS: [char; 16] = ['б', 'в', 'г', 'д', 'з', 'к', 'л', 'м', 'н', 'п', 'р', 'с', 'т', 'х', 'ц', 'ш'];
const VOWELS: [char; 7] = ['а', 'э', 'и', 'о', 'у', 'ө', 'ү'];

pub const AGENCIES: [&str; 2] = ["Боловсролын яам", "Эрүүл мэндийн яам"];

/// `count` distinct Cyrillic-looking words that survive default cleaning.
pub fn cyrillic_words(rng: &mut ChaCha8Rng, count: usize, exclude: &BTreeSet<String>) -> Vec<String> {
    let clean = CleaningConfig::default();
    let mut seen = exclude.clone();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.gen_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(*CONSONANTS.choose(rng).unwrap());
            w.push(*VOWELS.choose(rng).unwrap());
        }
        if rng.gen_bool(0.5) {
            w.push(*CONSONANTS.choose(rng).unwrap());
        }
        if clean.stopwords.contains(&w) || clean.noise_tokens.contains(&w) || !seen.insert(w.clone()) {
            continue;
        }
        out.push(w);
    }
    out
}

pub struct Corpus {
    /// (id, text, type, agency)
    pub rows: Vec<(String, String, &'static str, &'static str)>,
    pub keywords: [Vec<String>; 2],
}

/// Two agencies, each signalled by one or two of its own keywords inside
/// shared filler text.
pub fn keyword_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler = cyrillic_words(&mut rng, 150, &BTreeSet::new());
    let taken: BTreeSet<String> = filler.iter().cloned().collect();
    let kw = cyrillic_words(&mut rng, 8, &taken);
    let keywords = [kw[..4].to_vec(), kw[4..].to_vec()];
    let types = ["comment", "complaint", "criticism", "request", "compliment"];
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let len = rng.gen_range(6..=14);
        let mut words: Vec<String> = (0..len).map(|_| filler.choose(&mut rng).unwrap().clone()).collect();
        for _ in 0..rng.gen_range(1..=2) {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, keywords[class].choose(&mut rng).unwrap().clone());
        }
        rows.push((
            format!("fb{i:05}"),
            words.join(" "),
            *types.choose(&mut rng).unwrap(),
            AGENCIES[class],
        ));
    }
    Corpus { rows, keywords }
}

pub fn write_csv(path: &Path, rows: &[(String, String, &str, &str)]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["id", "text", "type", "agency"]).unwrap();
    for (id, text, ty, agency) in rows {
        w.write_record([id.as_str(), text, ty, agency]).unwrap();
    }
    w.flush().unwrap();
}

/// A small-dimension agency experiment over `input`, writing into `out`.
pub fn small_config(input: &Path, out: &Path) -> Value {
    json!({
        "paths": {"input": input, "output_dir": out},
        "task": "agency",
        "seq_len": 24,
        "embedding_source": "train_word2vec",
        "word2vec": {"dim": 16, "window": 3, "negatives": 5, "epochs": 3, "learning_rate": 0.05,
                     "min_count": 1, "subsample_threshold": 0.0, "seed": 3, "threads": 1},
        "model": {"architecture": "bilstm", "dim": 16, "lstm1_units": 12, "lstm2_units": 8,
                  "dense_units": 8},
        "split": {"mode": "holdout", "train_frac": 0.7, "val_frac": 0.1, "test_frac": 0.2, "seed": 5},
        "train": {"batch_size": 32, "max_epochs": 3,
                  "optimizer": {"kind": "adam", "lr": 0.01, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}},
        "seed": 11
    })
}

pub fn write_config(path: &Path, cfg: &Value) -> PathBuf {
    std::fs::write(path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_path_buf()
}
