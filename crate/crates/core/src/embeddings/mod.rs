//! Word vectors: CBOW training, `.vec` files and projection onto a task vocabulary.

mod matrix;
mod neighbors;
mod project;
mod vecfile;
mod word2vec;

pub use matrix::{cosine, EmbeddingMatrix};
pub use neighbors::WordVectors;
pub use project::{project_checked, project_to_vocab, OovPolicy, Projection};
pub use vecfile::{load_vec, load_vec_binary, save_vec, save_vec_binary};
pub use word2vec::{
    negative_sampling_grads, negative_sampling_loss, train_word2vec_cbow, NegativeSamplingGrads, Word2Vec,
    Word2VecConfig,
};
