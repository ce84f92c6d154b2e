use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The five feedback categories used by the relations centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackType {
    Comment,
    Complaint,
    Criticism,
    Request,
    Compliment,
}

impl FeedbackType {
    pub const ALL: [FeedbackType; 5] = [
        FeedbackType::Comment,
        FeedbackType::Complaint,
        FeedbackType::Criticism,
        FeedbackType::Request,
        FeedbackType::Compliment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackType::Comment => "comment",
            FeedbackType::Complaint => "complaint",
            FeedbackType::Criticism => "criticism",
            FeedbackType::Request => "request",
            FeedbackType::Compliment => "compliment",
        }
    }
}

impl fmt::Display for FeedbackType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeedbackType {
    type Err = String;

    /// Accepts the English names and the Mongolian labels used in the source exports.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_lowercase();
        let ty = match lowered.as_str() {
            "comment" | "санал" => FeedbackType::Comment,
            "complaint" | "гомдол" => FeedbackType::Complaint,
            "criticism" | "шүүмжлэл" => FeedbackType::Criticism,
            "request" | "хүсэлт" => FeedbackType::Request,
            "compliment" | "gratitude" | "талархал" => FeedbackType::Compliment,
            _ => return Err(format!("unknown feedback type `{}`", s.trim())),
        };
        Ok(ty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub id: String,
    pub text: String,
    pub feedback_type: FeedbackType,
    pub agency: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub received_at: Option<String>,
}

/// Two-way sentiment grouping of feedback types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Neutral,
    Negative,
    Excluded,
}

impl EmotionLabel {
    /// Class names in label-index order; `Excluded` has no index.
    pub const CLASSES: [&'static str; 2] = ["neutral", "negative"];

    pub fn class_index(self) -> Option<usize> {
        match self {
            EmotionLabel::Neutral => Some(0),
            EmotionLabel::Negative => Some(1),
            EmotionLabel::Excluded => None,
        }
    }
}

/// Criticisms and complaints are negative, comments and requests neutral.
/// Compliments are too rare to train on and are excluded.
pub fn map_emotion_label(feedback_type: FeedbackType) -> EmotionLabel {
    match feedback_type {
        FeedbackType::Criticism | FeedbackType::Complaint => EmotionLabel::Negative,
        FeedbackType::Comment | FeedbackType::Request => EmotionLabel::Neutral,
        FeedbackType::Compliment => EmotionLabel::Excluded,
    }
}
