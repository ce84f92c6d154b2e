//! Feedback classification engine.
//!
//! The crate covers the whole modelling pipeline for short free-text
//! feedback written in Cyrillic:
//!
//! - [`corpus`]: ingestion, cleaning, tokenization, vocabularies, label mapping
//! - [`embeddings`]: CBOW word2vec training and `.vec` loading/projection
//! - [`tensor`]: a small dense tensor library with reverse-mode differentiation
//! - [`models`]: the CNN and stacked BiLSTM classifiers plus checkpoints
//! - [`training`]: splits, k-fold, optimizers, early stopping and metrics

pub mod corpus;
pub mod embeddings;
mod error;
pub mod models;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
