//! Stratified cross-validation, metrics, and the trainable methods the
//! harness evaluates.

mod cv;
mod folds;
mod methods;
mod metrics;

pub use cv::{fold_split, run_cv, EvalReport, FoldMetrics, FoldResult, FoldSplit, TOP_K_SET};
pub use folds::{stratified_kfold, FoldPlan};
pub use methods::{EmbeddingLr, Method, MethodKind, MetricKnn, Ranker, TfidfLr};
pub use metrics::{accuracy, macro_f1, top_k_accuracy};
