//! TOML run configuration. Every key is optional; command-line flags win
//! over file values, which win over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use stylo::features::TfidfConfig;
use stylo::linear::LogRegConfig;
use stylo::metric::MetricConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub design: Option<String>,
    pub methods: Option<Vec<String>>,
    #[serde(rename = "U", alias = "u")]
    pub u: Option<usize>,
    pub k: Option<usize>,
    #[serde(rename = "K_max", alias = "k_max")]
    pub k_max: Option<usize>,
    pub u_grid: Option<Vec<usize>>,
    pub k_grid: Option<Vec<usize>>,
    pub k_max_grid: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub embeddings: Option<PathBuf>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub tfidf: Option<TfidfSection>,
    pub logreg: Option<LogRegSection>,
    pub metric: Option<MetricSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfidfSection {
    pub ngram_min: Option<usize>,
    pub ngram_max: Option<usize>,
    pub max_features: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRegSection {
    #[serde(rename = "C", alias = "c")]
    pub c: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    pub embed_dim: Option<usize>,
    pub margin: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_authors: Option<usize>,
    pub batch_per_author: Option<usize>,
    pub learning_rate: Option<f64>,
    pub knn_k: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn tfidf(&self) -> TfidfConfig {
        let mut c = TfidfConfig::default();
        if let Some(s) = &self.tfidf {
            c.ngram_min = s.ngram_min.unwrap_or(c.ngram_min);
            c.ngram_max = s.ngram_max.unwrap_or(c.ngram_max);
            c.max_features = s.max_features.unwrap_or(c.max_features);
        }
        c
    }

    pub fn logreg(&self) -> LogRegConfig {
        let mut c = LogRegConfig::default();
        if let Some(s) = &self.logreg {
            c.inverse_reg_c = s.c.unwrap_or(c.inverse_reg_c);
            c.max_iter = s.max_iter.unwrap_or(c.max_iter);
            c.tol = s.tol.unwrap_or(c.tol);
        }
        c
    }

    pub fn metric(&self) -> MetricConfig {
        let mut c = MetricConfig::default();
        if let Some(s) = &self.metric {
            c.embed_dim = s.embed_dim.unwrap_or(c.embed_dim);
            c.margin = s.margin.unwrap_or(c.margin);
            c.epochs = s.epochs.unwrap_or(c.epochs);
            c.batch_authors = s.batch_authors.unwrap_or(c.batch_authors);
            c.batch_per_author = s.batch_per_author.unwrap_or(c.batch_per_author);
            c.learning_rate = s.learning_rate.unwrap_or(c.learning_rate);
            c.knn_k = s.knn_k.unwrap_or(c.knn_k);
        }
        c
    }
}
