use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Review;
use crate::error::{Error, Result};
use crate::features::{fit_tfidf, DenseMatrix, FeatureRows, SparseVector, TfidfConfig, VectorizerModel};
use crate::knn::KnnIndex;
use crate::linear::{rank_top_k, train_logreg, LinearClassifier, LogRegConfig};
use crate::metric::{train_metric, MetricConfig, MetricEmbedder};

/// A model fitted on one training split.
pub trait Ranker: Send + Sync {
    /// Complete class ranking per review, best first.
    fn rank(&self, reviews: &[&Review]) -> Result<Vec<Vec<usize>>>;

    /// The fold's fitted vectorizer, when the method has one.
    fn vectorizer(&self) -> Option<&VectorizerModel> {
        None
    }
}

/// A trainable attribution method.
pub trait Method: Send + Sync {
    fn name(&self) -> &str;

    /// Fits every learned component on `reviews` only.
    fn fit(&self, reviews: &[&Review], labels: &[usize], class_labels: &[String]) -> Result<Box<dyn Ranker>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    TfidfLr,
    EmbLr,
    MetricKnn,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [MethodKind::TfidfLr, MethodKind::EmbLr, MethodKind::MetricKnn];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::TfidfLr => "tfidf_lr",
            MethodKind::EmbLr => "emb_lr",
            MethodKind::MetricKnn => "metric_knn",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?} (expected tfidf_lr, emb_lr or metric_knn)")))
    }
}

fn texts<'a>(reviews: &[&'a Review]) -> Vec<&'a str> {
    reviews.iter().map(|r| r.text.as_str()).collect()
}

fn full_rankings(model: &LinearClassifier, rows: &[SparseVector]) -> Result<Vec<Vec<usize>>> {
    rows.par_iter()
        .map(|x| {
            let scores = model.decision_function(x)?;
            rank_top_k(&scores, scores.len())
        })
        .collect()
}

/// Character n-gram TF-IDF features with multinomial logistic regression.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TfidfLr {
    pub tfidf: TfidfConfig,
    pub logreg: LogRegConfig,
}

struct TfidfLrModel {
    vectorizer: VectorizerModel,
    classifier: LinearClassifier,
}

impl Method for TfidfLr {
    fn name(&self) -> &str {
        MethodKind::TfidfLr.as_str()
    }

    fn fit(&self, reviews: &[&Review], labels: &[usize], class_labels: &[String]) -> Result<Box<dyn Ranker>> {
        let docs = texts(reviews);
        let vectorizer = fit_tfidf(&docs, &self.tfidf)?;
        let x = FeatureRows::new(vectorizer.transform_all(&docs), vectorizer.len())?;
        let classifier = train_logreg(&x, labels, class_labels.to_vec(), &self.logreg)?;
        Ok(Box::new(TfidfLrModel {
            vectorizer,
            classifier,
        }))
    }
}

impl Ranker for TfidfLrModel {
    fn rank(&self, reviews: &[&Review]) -> Result<Vec<Vec<usize>>> {
        let rows = self.vectorizer.transform_all(&texts(reviews));
        full_rankings(&self.classifier, &rows)
    }

    fn vectorizer(&self) -> Option<&VectorizerModel> {
        Some(&self.vectorizer)
    }
}

/// Logistic regression over imported dense embeddings, looked up by
/// review id.
#[derive(Debug, Clone)]
pub struct EmbeddingLr {
    pub embeddings: Arc<DenseMatrix>,
    pub logreg: LogRegConfig,
}

impl EmbeddingLr {
    pub fn new(embeddings: Arc<DenseMatrix>) -> Self {
        EmbeddingLr {
            embeddings,
            logreg: LogRegConfig::default(),
        }
    }

    fn rows(&self, reviews: &[&Review]) -> Result<Vec<SparseVector>> {
        reviews
            .iter()
            .map(|r| {
                let row = self.embeddings.row_by_id(&r.review_id).ok_or_else(|| {
                    Error::EmbeddingFormat(format!("no embedding for review {:?}", r.review_id))
                })?;
                let dense: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
                Ok(SparseVector::from_dense(&dense))
            })
            .collect()
    }
}

struct EmbeddingLrModel {
    source: EmbeddingLr,
    classifier: LinearClassifier,
}

impl Method for EmbeddingLr {
    fn name(&self) -> &str {
        MethodKind::EmbLr.as_str()
    }

    fn fit(&self, reviews: &[&Review], labels: &[usize], class_labels: &[String]) -> Result<Box<dyn Ranker>> {
        let x = FeatureRows::new(self.rows(reviews)?, self.embeddings.dim())?;
        let classifier = train_logreg(&x, labels, class_labels.to_vec(), &self.logreg)?;
        Ok(Box::new(EmbeddingLrModel {
            source: self.clone(),
            classifier,
        }))
    }
}

impl Ranker for EmbeddingLrModel {
    fn rank(&self, reviews: &[&Review]) -> Result<Vec<Vec<usize>>> {
        full_rankings(&self.classifier, &self.source.rows(reviews)?)
    }
}

/// TF-IDF features, a triplet-trained linear embedding, and cosine kNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricKnn {
    pub tfidf: TfidfConfig,
    pub metric: MetricConfig,
    /// Largest Top-k the candidate ranking has to support.
    pub max_k_eval: usize,
}

impl Default for MetricKnn {
    fn default() -> Self {
        MetricKnn {
            tfidf: TfidfConfig::default(),
            metric: MetricConfig::default(),
            max_k_eval: 10,
        }
    }
}

impl MetricKnn {
    pub fn neighbor_pool(&self) -> usize {
        (self.max_k_eval * self.metric.knn_k).max(30)
    }
}

struct MetricKnnModel {
    vectorizer: VectorizerModel,
    embedder: MetricEmbedder,
    index: KnnIndex,
    knn_k: usize,
    pool: usize,
}

impl Method for MetricKnn {
    fn name(&self) -> &str {
        MethodKind::MetricKnn.as_str()
    }

    fn fit(&self, reviews: &[&Review], labels: &[usize], class_labels: &[String]) -> Result<Box<dyn Ranker>> {
        let docs = texts(reviews);
        let vectorizer = fit_tfidf(&docs, &self.tfidf)?;
        let x = FeatureRows::new(vectorizer.transform_all(&docs), vectorizer.len())?;
        let embedder = train_metric(&x, labels, class_labels.len(), &self.metric)?;
        let train = embedder.embed_all(&x)?;
        let index = KnnIndex::new(&train, labels, class_labels.len())?;
        Ok(Box::new(MetricKnnModel {
            vectorizer,
            embedder,
            index,
            knn_k: self.metric.knn_k,
            pool: self.neighbor_pool(),
        }))
    }
}

impl Ranker for MetricKnnModel {
    fn rank(&self, reviews: &[&Review]) -> Result<Vec<Vec<usize>>> {
        reviews
            .par_iter()
            .map(|r| {
                let q = self.embedder.embed(&self.vectorizer.transform(&r.text))?;
                Ok(self.index.rank(&q, self.knn_k, self.pool)?.authors)
            })
            .collect()
    }

    fn vectorizer(&self) -> Option<&VectorizerModel> {
        Some(&self.vectorizer)
    }
}
