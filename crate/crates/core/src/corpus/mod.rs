//! Feedback ingestion and preprocessing.

mod clean;
mod encode;
mod ingest;
mod record;
mod subsample;
mod vocab;

pub use clean::{
    cyrillic_ratio, default_strip_chars, filter_tokens, is_cyrillic_dominant, load_token_list,
    normalize_text, parse_token_list, tokenize, CleaningConfig,
};
pub use encode::{decode_sequence, encode_example, encode_sequence, EncodedExample};
pub use ingest::{ingest_csv, ingest_jsonl, ingest_path, write_rejects, ColumnMapping, Ingested, Reject};
pub use record::{map_emotion_label, EmotionLabel, FeedbackRecord, FeedbackType};
pub use subsample::{balance_subsample, ClassDraw};
pub use vocab::{build_vocabulary, Vocabulary, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};

/// Normalize → tokenize → filter for one text.
pub fn clean_tokens(raw: &str, config: &CleaningConfig) -> Vec<String> {
    filter_tokens(tokenize(&normalize_text(raw, config)), config)
}
