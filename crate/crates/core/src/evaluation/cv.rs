use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use super::methods::Method;
use super::metrics::{accuracy, macro_f1, top_k_accuracy};
use crate::corpus::{Corpus, Review};
use crate::error::{Error, Result};

/// Candidate-list sizes reported alongside Top-1.
pub const TOP_K_SET: [usize; 3] = [3, 5, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
    pub top10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(flatten)]
    pub metrics: Option<FoldMetrics>,
    pub train_seconds: f64,
    pub infer_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Cross-validation summary. Means and SDs run over completed folds only
/// (SD with the population divisor); they are NaN, serialized as `null`,
/// when no fold completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub n_samples: usize,
    pub n_classes: usize,
    pub n_folds: usize,
    pub seed: u64,
    #[serde(with = "crate::serde_nan")]
    pub accuracy_mean: f64,
    #[serde(with = "crate::serde_nan")]
    pub accuracy_sd: f64,
    #[serde(with = "crate::serde_nan")]
    pub macro_f1_mean: f64,
    #[serde(with = "crate::serde_nan")]
    pub macro_f1_sd: f64,
    #[serde(with = "crate::serde_nan")]
    pub top3_mean: f64,
    #[serde(with = "crate::serde_nan")]
    pub top5_mean: f64,
    #[serde(with = "crate::serde_nan")]
    pub top10_mean: f64,
    #[serde(with = "crate::serde_nan")]
    pub train_seconds_mean: f64,
    #[serde(with = "crate::serde_nan")]
    pub infer_seconds_mean: f64,
    pub failed_folds: usize,
    pub per_fold: Vec<FoldResult>,
}

impl EvalReport {
    pub fn failed(&self) -> bool {
        self.failed_folds > 0
    }

    /// Copy with every timing field zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> EvalReport {
        let mut r = self.clone();
        r.train_seconds_mean = 0.0;
        r.infer_seconds_mean = 0.0;
        for f in &mut r.per_fold {
            f.train_seconds = 0.0;
            f.infer_seconds = 0.0;
        }
        r
    }
}

/// Training and test reviews of one fold, with class indices.
pub struct FoldSplit<'a> {
    pub train: Vec<&'a Review>,
    pub train_labels: Vec<usize>,
    pub test: Vec<&'a Review>,
    pub test_labels: Vec<usize>,
}

pub fn fold_split<'a>(corpus: &'a Corpus, labels: &[usize], plan: &FoldPlan, fold: usize) -> FoldSplit<'a> {
    let pick = |idx: Vec<usize>| -> (Vec<&'a Review>, Vec<usize>) {
        idx.into_iter().map(|i| (&corpus.reviews()[i], labels[i])).unzip()
    };
    let (train, train_labels) = pick(plan.train_indices(fold));
    let (test, test_labels) = pick(plan.test_indices(fold));
    FoldSplit {
        train,
        train_labels,
        test,
        test_labels,
    }
}

fn evaluate_fold(
    method: &dyn Method,
    split: &FoldSplit<'_>,
    class_labels: &[String],
    timings: &mut (f64, f64),
) -> Result<FoldMetrics> {
    let start = Instant::now();
    let model = method.fit(&split.train, &split.train_labels, class_labels)?;
    timings.0 = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let rankings = model.rank(&split.test)?;
    timings.1 = start.elapsed().as_secs_f64();

    let y = &split.test_labels;
    let pred: Vec<usize> = rankings
        .iter()
        .map(|r| r.first().copied().ok_or_else(|| Error::InvalidInput("empty ranking".into())))
        .collect::<Result<_>>()?;
    let top = |k: usize| top_k_accuracy(y, &rankings, k.min(class_labels.len()));
    Ok(FoldMetrics {
        accuracy: accuracy(y, &pred)?,
        macro_f1: macro_f1(y, &pred)?,
        top1: top(1)?,
        top3: top(TOP_K_SET[0])?,
        top5: top(TOP_K_SET[1])?,
        top10: top(TOP_K_SET[2])?,
    })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Cross-validates `method` on `corpus` under `plan`.
///
/// A fold whose training or prediction fails is recorded with its error
/// and excluded from the aggregates.
pub fn run_cv(method: &dyn Method, corpus: &Corpus, plan: &FoldPlan) -> Result<EvalReport> {
    if plan.len() != corpus.len() {
        return Err(Error::DimensionMismatch {
            expected: corpus.len(),
            actual: plan.len(),
        });
    }
    let (class_labels, labels) = corpus.labels();
    let mut per_fold = Vec::with_capacity(plan.n_folds);
    for fold in 0..plan.n_folds {
        let split = fold_split(corpus, &labels, plan, fold);
        let mut timings = (0.0, 0.0);
        let outcome = evaluate_fold(method, &split, &class_labels, &mut timings);
        if let Err(e) = &outcome {
            log::warn!("{} fold {fold} failed: {e}", method.name());
        }
        per_fold.push(FoldResult {
            fold,
            n_train: split.train.len(),
            n_test: split.test.len(),
            train_seconds: timings.0,
            infer_seconds: timings.1,
            error: outcome.as_ref().err().map(|e| e.to_string()),
            metrics: outcome.ok(),
        });
    }

    let done: Vec<(&FoldResult, &FoldMetrics)> = per_fold
        .iter()
        .filter_map(|f| f.metrics.as_ref().map(|m| (f, m)))
        .collect();
    let col = |g: fn(&FoldResult, &FoldMetrics) -> f64| mean_sd(&done.iter().map(|(f, m)| g(f, m)).collect::<Vec<_>>());
    let (accuracy_mean, accuracy_sd) = col(|_, m| m.accuracy);
    let (macro_f1_mean, macro_f1_sd) = col(|_, m| m.macro_f1);
    Ok(EvalReport {
        method: method.name().to_string(),
        n_samples: corpus.len(),
        n_classes: class_labels.len(),
        n_folds: plan.n_folds,
        seed: plan.seed,
        accuracy_mean,
        accuracy_sd,
        macro_f1_mean,
        macro_f1_sd,
        top3_mean: col(|_, m| m.top3).0,
        top5_mean: col(|_, m| m.top5).0,
        top10_mean: col(|_, m| m.top10).0,
        train_seconds_mean: col(|f, _| f.train_seconds).0,
        infer_seconds_mean: col(|f, _| f.infer_seconds).0,
        failed_folds: per_fold.len() - done.len(),
        per_fold,
    })
}
