//! Splitting, the training loop, optimizers and evaluation metrics.

mod metrics;
mod optim;
mod report;
mod split;
mod trainer;

pub use metrics::{compute_metrics, summarize_folds, ClassMetrics, FoldSummary, MeanStd, Metrics};
pub use optim::{Optimizer, OptimizerConfig};
pub use report::{write_confusion_csv, write_history_csv, write_json};
pub use split::{holdout_subset, kfold_split, split_dataset, Fold, Split, SplitMode, SplitSpec};
pub use trainer::{
    argmax, evaluate, predict_proba, train_model, EarlyStopping, EarlyStoppingConfig, EpochRecord, Evaluation,
    History, StopDecision, TrainConfig,
};
