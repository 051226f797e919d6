//! Multinomial logistic regression with L2 regularization.
//!
//! The training objective is
//! `(1 / C) * ||W||^2 / 2 + sum_i CE(softmax(W x_i + b), y_i)`,
//! with the bias left unregularized. It is minimized by L-BFGS starting
//! from all-zero parameters; the optimizer sees the objective divided by
//! the number of samples, which has the same minimizer and keeps the
//! gradient-norm tolerance independent of dataset size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureRows, SparseVector};
use crate::optim::{self, LbfgsOptions, Termination};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub inverse_reg_c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            inverse_reg_c: 1.0,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

impl LogRegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inverse_reg_c > 0.0 && self.inverse_reg_c.is_finite()) {
            return Err(Error::InvalidConfig("C must be a positive finite number".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        Ok(())
    }
}

/// Softmax cross-entropy objective over sparse rows.
///
/// Parameters are laid out as the feature-major weight matrix
/// (`n_features x n_classes`, row-major) followed by the `n_classes` biases.
pub struct SoftmaxObjective<'a> {
    x: &'a FeatureRows,
    y: &'a [usize],
    n_classes: usize,
    c: f64,
}

impl<'a> SoftmaxObjective<'a> {
    pub fn new(x: &'a FeatureRows, y: &'a [usize], n_classes: usize, c: f64) -> Self {
        SoftmaxObjective { x, y, n_classes, c }
    }

    pub fn n_params(&self) -> usize {
        (self.x.dim() + 1) * self.n_classes
    }

    /// Objective value; the gradient is written into `grad`.
    pub fn evaluate(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.n_classes;
        let n_w = self.x.dim() * k;
        let (w, b) = params.split_at(n_w);
        grad.iter_mut().for_each(|g| *g = 0.0);

        let mut value = 0.0;
        for (gw, wj) in grad[..n_w].iter_mut().zip(w) {
            *gw = wj / self.c;
            value += wj * wj;
        }
        value *= 0.5 / self.c;

        let mut scores = vec![0.0; k];
        for (row, &label) in self.x.rows().iter().zip(self.y) {
            linear_scores(w, b, k, row, &mut scores);
            let lse = log_sum_exp(&scores);
            value += lse - scores[label];
            // scores become p - onehot
            scores.iter_mut().for_each(|s| *s = (*s - lse).exp());
            scores[label] -= 1.0;
            for (j, xj) in row.iter() {
                let gj = &mut grad[j * k..(j + 1) * k];
                for (g, d) in gj.iter_mut().zip(&scores) {
                    *g += xj * d;
                }
            }
            for (g, d) in grad[n_w..].iter_mut().zip(&scores) {
                *g += d;
            }
        }
        value
    }
}

fn linear_scores(w: &[f64], b: &[f64], k: usize, x: &SparseVector, out: &mut [f64]) {
    out.copy_from_slice(b);
    for (j, xj) in x.iter() {
        for (o, wjk) in out.iter_mut().zip(&w[j * k..(j + 1) * k]) {
            *o += xj * wjk;
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|x| (x - lse).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_grad_norm: f64,
    /// Per-sample objective at the start and after each accepted step.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    n_features: usize,
    /// Feature-major: entry `(j, k)` at `j * n_classes + k`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    class_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<TrainingSummary>,
}

pub fn train_logreg(
    x: &FeatureRows,
    y: &[usize],
    class_labels: Vec<String>,
    config: &LogRegConfig,
) -> Result<LinearClassifier> {
    config.validate()?;
    let k = class_labels.len();
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("need at least two training samples".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidInput(format!("label {bad} out of range for {k} classes")));
    }
    let mut present = vec![false; k];
    y.iter().for_each(|&c| present[c] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::InvalidInput("training data contains a single class".into()));
    }
    if x.rows().iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }

    let objective = SoftmaxObjective::new(x, y, k, config.inverse_reg_c);
    let scale = 1.0 / x.len() as f64;
    let opts = LbfgsOptions {
        max_iter: config.max_iter,
        grad_tol: config.tol,
        ..LbfgsOptions::default()
    };
    let result = optim::minimize(
        vec![0.0; objective.n_params()],
        |p, g| {
            let v = objective.evaluate(p, g);
            g.iter_mut().for_each(|gi| *gi *= scale);
            v * scale
        },
        &opts,
    );
    log::debug!(
        "logreg: {} iterations, |g| = {:.3e}, {:?}",
        result.iterations,
        result.grad_norm,
        result.termination
    );
    if result.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("training diverged to non-finite parameters".into()));
    }

    let n_w = x.dim() * k;
    let mut weights = result.x;
    let bias = weights.split_off(n_w);
    Ok(LinearClassifier {
        n_features: x.dim(),
        weights,
        bias,
        class_labels,
        summary: Some(TrainingSummary {
            iterations: result.iterations,
            converged: result.termination == Termination::GradientTolerance,
            final_grad_norm: result.grad_norm,
            objective_trace: result.trace,
        }),
    })
}

impl LinearClassifier {
    /// Builds a classifier from explicit parameters (`weights` is
    /// feature-major, `n_features * n_classes`).
    pub fn from_parts(
        n_features: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        class_labels: Vec<String>,
    ) -> Result<Self> {
        let k = class_labels.len();
        if k < 2 {
            return Err(Error::InvalidInput("a classifier needs at least two classes".into()));
        }
        if bias.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: bias.len(),
            });
        }
        if weights.len() != n_features * k {
            return Err(Error::DimensionMismatch {
                expected: n_features * k,
                actual: weights.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        Ok(LinearClassifier {
            n_features,
            weights,
            bias,
            class_labels,
            summary: None,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn weight(&self, feature: usize, class: usize) -> f64 {
        self.weights[feature * self.n_classes() + class]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn summary(&self) -> Option<&TrainingSummary> {
        self.summary.as_ref()
    }

    pub fn decision_function(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.min_dim() > self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.min_dim(),
            });
        }
        let mut out = vec![0.0; self.n_classes()];
        linear_scores(&self.weights, &self.bias, self.n_classes(), x, &mut out);
        Ok(out)
    }

    /// Class probabilities `softmax(W x + b)`.
    pub fn predict_scores(&self, x: &SparseVector) -> Result<Vec<f64>> {
        Ok(softmax(&self.decision_function(x)?))
    }

    pub fn predict(&self, x: &SparseVector) -> Result<usize> {
        let scores = self.predict_scores(x)?;
        Ok(rank_top_k(&scores, 1)?[0])
    }
}

/// Indices of the `k` highest scores, descending; ties go to the lower index.
pub fn rank_top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::InvalidInput(format!(
            "k = {k} outside 1..={}",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}
