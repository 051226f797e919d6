//! Batch-hard triplet metric learning over a linear projection.
//!
//! `embed(x) = normalize(P^T x)`. Training samples P authors x K reviews
//! per batch so every anchor has at least one positive and one negative,
//! and updates `P` with Adam restricted to the rows the batch touches.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureRows, SparseVector};
use crate::rng;

const DIST_EPS: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub embed_dim: usize,
    pub margin: f64,
    pub epochs: usize,
    /// Authors per batch.
    pub batch_authors: usize,
    /// Reviews per author per batch.
    pub batch_per_author: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub knn_k: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            embed_dim: 256,
            margin: 0.2,
            epochs: 10,
            batch_authors: 8,
            batch_per_author: 2,
            learning_rate: 1e-3,
            seed: 42,
            knn_k: 3,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_authors < 2 || self.batch_per_author < 2 {
            return Err(Error::InvalidConfig(
                "batch-hard mining needs at least 2 authors and 2 reviews per author".into(),
            ));
        }
        if !(self.margin > 0.0) {
            return Err(Error::InvalidConfig("margin must be positive".into()));
        }
        if self.embed_dim == 0 || self.knn_k == 0 {
            return Err(Error::InvalidConfig("embed_dim and knn_k must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Loss value and its gradient with respect to each input embedding.
#[derive(Debug, Clone)]
pub struct TripletLoss {
    pub value: f64,
    pub grad: Vec<Vec<f64>>,
    /// Anchors with a positive hinge.
    pub active_anchors: usize,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .max(DIST_EPS)
        .sqrt()
}

fn check_batch(embeddings: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if embeddings.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: embeddings.len(),
            actual: labels.len(),
        });
    }
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    if counts.len() < 2 {
        return Err(Error::InvalidInput("batch needs at least two distinct labels".into()));
    }
    if let Some((&l, &n)) = counts.iter().find(|(_, &n)| n < 2) {
        return Err(Error::ClassTooSmall {
            class: l,
            required: 2,
            available: n,
        });
    }
    Ok(())
}

/// Batch-hard triplet loss on unit-norm embeddings with Euclidean distance.
///
/// For each anchor, the farthest same-label point and the nearest
/// other-label point form the triplet; the loss is the mean hinge
/// `max(0, d_ap - d_an + margin)` over anchors.
pub fn batch_hard_triplet_loss(embeddings: &[Vec<f64>], labels: &[usize], margin: f64) -> Result<TripletLoss> {
    check_batch(embeddings, labels)?;
    for (i, e) in embeddings.iter().enumerate() {
        let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidInput(format!("embedding {i} has norm {n}, expected 1")));
        }
    }
    Ok(triplet_loss_unchecked(embeddings, labels, margin))
}

/// Same as [`batch_hard_triplet_loss`] without the unit-norm and batch
/// composition checks.
pub fn triplet_loss_unchecked(embeddings: &[Vec<f64>], labels: &[usize], margin: f64) -> TripletLoss {
    let n = embeddings.len();
    let dim = embeddings.first().map_or(0, Vec::len);
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&embeddings[i], &embeddings[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut grad = vec![vec![0.0; dim]; n];
    let mut total = 0.0;
    let mut active = 0;
    let mut anchors = 0;
    for a in 0..n {
        let mut hardest_pos: Option<(usize, f64)> = None;
        let mut hardest_neg: Option<(usize, f64)> = None;
        for j in 0..n {
            if j == a {
                continue;
            }
            let d = dist[a * n + j];
            if labels[j] == labels[a] {
                if hardest_pos.is_none_or(|(_, best)| d > best) {
                    hardest_pos = Some((j, d));
                }
            } else if hardest_neg.is_none_or(|(_, best)| d < best) {
                hardest_neg = Some((j, d));
            }
        }
        let (Some((p, d_ap)), Some((q, d_an))) = (hardest_pos, hardest_neg) else {
            continue;
        };
        anchors += 1;
        let hinge = d_ap - d_an + margin;
        if hinge <= 0.0 {
            continue;
        }
        total += hinge;
        active += 1;
        // d(d_ap)/d e_a = (e_a - e_p) / d_ap ; d(-d_an)/d e_a = -(e_a - e_q) / d_an
        for t in 0..dim {
            let gp = (embeddings[a][t] - embeddings[p][t]) / d_ap;
            let gq = (embeddings[a][t] - embeddings[q][t]) / d_an;
            grad[a][t] += gp - gq;
            grad[p][t] -= gp;
            grad[q][t] += gq;
        }
    }
    let scale = if anchors > 0 { 1.0 / anchors as f64 } else { 0.0 };
    grad.iter_mut().flatten().for_each(|g| *g *= scale);
    TripletLoss {
        value: total * scale,
        grad,
        active_anchors: active,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEmbedder {
    input_dim: usize,
    /// Feature-major `input_dim x embed_dim`.
    projection: Vec<f64>,
    config: MetricConfig,
    /// Mean batch loss per epoch.
    #[serde(default)]
    epoch_losses: Vec<f64>,
}

impl MetricEmbedder {
    /// Untrained embedder with a seeded Gaussian projection scaled so that
    /// unit inputs map to roughly unit outputs.
    pub fn init(input_dim: usize, config: &MetricConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, "metric-init", &[]);
        let scale = 1.0 / (config.embed_dim as f64).sqrt();
        let projection = (0..input_dim * config.embed_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Ok(MetricEmbedder {
            input_dim,
            projection,
            config: config.clone(),
            epoch_losses: Vec::new(),
        })
    }

    pub fn config(&self) -> &MetricConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    pub fn projection_mut(&mut self) -> &mut [f64] {
        &mut self.projection
    }

    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    fn project(&self, x: &SparseVector) -> Vec<f64> {
        let d = self.config.embed_dim;
        let mut z = vec![0.0; d];
        for (j, v) in x.iter() {
            for (zi, pj) in z.iter_mut().zip(&self.projection[j * d..(j + 1) * d]) {
                *zi += v * pj;
            }
        }
        z
    }

    /// Unit-norm embedding. An input that projects to zero (e.g. a review
    /// with no in-vocabulary n-grams) maps to the normalized all-ones vector.
    pub fn embed(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.min_dim() > self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.min_dim(),
            });
        }
        let mut z = self.project(x);
        let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            z.iter_mut().for_each(|v| *v /= n);
        } else {
            let u = 1.0 / (z.len() as f64).sqrt();
            z.iter_mut().for_each(|v| *v = u);
        }
        Ok(z)
    }

    pub fn embed_all(&self, x: &FeatureRows) -> Result<Vec<Vec<f64>>> {
        x.rows().iter().map(|r| self.embed(r)).collect()
    }

    /// Batch-hard loss of the given samples and its gradient with respect
    /// to the projection (same layout as [`Self::projection`]).
    pub fn loss_and_gradient(&self, batch: &[&SparseVector], labels: &[usize]) -> (f64, Vec<f64>) {
        let d = self.config.embed_dim;
        let projected: Vec<Vec<f64>> = batch.iter().map(|x| self.project(x)).collect();
        let norms: Vec<f64> = projected
            .iter()
            .map(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt().max(DIST_EPS))
            .collect();
        let unit: Vec<Vec<f64>> = projected
            .iter()
            .zip(&norms)
            .map(|(z, n)| z.iter().map(|v| v / n).collect())
            .collect();
        let loss = triplet_loss_unchecked(&unit, labels, self.config.margin);

        let mut grad = vec![0.0; self.projection.len()];
        for ((x, (e, n)), g) in batch.iter().zip(unit.iter().zip(&norms)).zip(&loss.grad) {
            // back through normalization: (g - (g.e) e) / |z|
            let ge: f64 = g.iter().zip(e).map(|(a, b)| a * b).sum();
            let dz: Vec<f64> = g.iter().zip(e).map(|(gi, ei)| (gi - ge * ei) / n).collect();
            for (j, v) in x.iter() {
                for (gp, dzi) in grad[j * d..(j + 1) * d].iter_mut().zip(&dz) {
                    *gp += v * dzi;
                }
            }
        }
        (loss.value, grad)
    }
}

struct LazyAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl LazyAdam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        LazyAdam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr,
        }
    }

    /// Updates only the parameter rows listed in `rows` (each `width` wide).
    fn update(&mut self, params: &mut [f64], grad: &[f64], rows: &[usize], width: usize) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for &r in rows {
            for i in r * width..(r + 1) * width {
                let g = grad[i];
                self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
                self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
                params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Trains the projection on `x` with class labels `y` (`n_classes` classes).
pub fn train_metric(x: &FeatureRows, y: &[usize], n_classes: usize, config: &MetricConfig) -> Result<MetricEmbedder> {
    config.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::InvalidInput(format!("label {c} out of range")));
        }
        by_class[c].push(i);
    }
    let k = config.batch_per_author;
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                required: k,
                available: members.len(),
            });
        }
    }
    let classes: Vec<usize> = (0..n_classes).filter(|&c| !by_class[c].is_empty()).collect();
    if classes.len() < 2 {
        return Err(Error::InvalidInput("metric training needs at least two classes".into()));
    }

    let mut model = MetricEmbedder::init(x.dim(), config)?;
    let d = config.embed_dim;
    let p = config.batch_authors.min(classes.len());
    let batches_per_epoch = (x.len() / (p * k)).max(1);
    let mut rng = rng::stream(config.seed, "metric-batches", &[]);
    let mut adam = LazyAdam::new(model.projection.len(), config.learning_rate);

    let mut batch_rows: Vec<&SparseVector> = Vec::with_capacity(p * k);
    let mut batch_labels: Vec<usize> = Vec::with_capacity(p * k);
    let mut touched: Vec<usize> = Vec::new();
    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        for _ in 0..batches_per_epoch {
            batch_rows.clear();
            batch_labels.clear();
            for ci in index::sample(&mut rng, classes.len(), p) {
                let c = classes[ci];
                for si in index::sample(&mut rng, by_class[c].len(), k) {
                    batch_rows.push(x.row(by_class[c][si]));
                    batch_labels.push(c);
                }
            }
            let (loss, grad) = model.loss_and_gradient(&batch_rows, &batch_labels);
            epoch_loss += loss;

            touched.clear();
            touched.extend(batch_rows.iter().flat_map(|r| r.indices().iter().map(|&j| j as usize)));
            touched.sort_unstable();
            touched.dedup();
            adam.update(&mut model.projection, &grad, &touched, d);
        }
        let mean = epoch_loss / batches_per_epoch as f64;
        log::debug!("metric epoch {epoch}: mean batch loss {mean:.4}");
        model.epoch_losses.push(mean);
    }
    if model.projection.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("metric training diverged".into()));
    }
    Ok(model)
}
