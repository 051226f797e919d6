use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::SparseVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub max_features: usize,
    /// `ln((1 + N) / (1 + df)) + 1` when set, `ln(N / df) + 1` otherwise.
    pub idf_smoothing: bool,
    pub l2_normalize: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            ngram_min: 2,
            ngram_max: 3,
            max_features: 10_000,
            idf_smoothing: true,
            l2_normalize: true,
        }
    }
}

impl TfidfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(Error::InvalidConfig(format!(
                "n-gram range {}..={} is invalid",
                self.ngram_min, self.ngram_max
            )));
        }
        if self.max_features == 0 {
            return Err(Error::InvalidConfig("max_features must be at least 1".into()));
        }
        Ok(())
    }
}

/// Character n-grams of `text` for every `n` in `min..=max`, as slices of
/// the input. Ordered by `n`, then by position.
pub fn char_ngrams(text: &str, min: usize, max: usize) -> Vec<&str> {
    let mut bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
    let chars = bounds.len();
    bounds.push(text.len());
    let mut out = Vec::new();
    for n in min.max(1)..=max {
        if n > chars {
            break;
        }
        out.extend((0..=chars - n).map(|i| &text[bounds[i]..bounds[i + n]]));
    }
    out
}

/// A fitted vocabulary with idf weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorizerRepr", into = "VectorizerRepr")]
pub struct VectorizerModel {
    terms: Vec<String>,
    vocabulary: HashMap<String, u32>,
    idf: Vec<f64>,
    config: TfidfConfig,
}

#[derive(Serialize, Deserialize)]
struct VectorizerRepr {
    config: TfidfConfig,
    terms: Vec<String>,
    idf: Vec<f64>,
}

impl From<VectorizerModel> for VectorizerRepr {
    fn from(m: VectorizerModel) -> Self {
        VectorizerRepr {
            config: m.config,
            terms: m.terms,
            idf: m.idf,
        }
    }
}

impl TryFrom<VectorizerRepr> for VectorizerModel {
    type Error = Error;

    fn try_from(r: VectorizerRepr) -> Result<Self> {
        if r.terms.len() != r.idf.len() {
            return Err(Error::InvalidInput("terms and idf lengths differ".into()));
        }
        let vocabulary: HashMap<String, u32> = r
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        if vocabulary.len() != r.terms.len() {
            return Err(Error::InvalidInput("duplicate vocabulary terms".into()));
        }
        Ok(VectorizerModel {
            terms: r.terms,
            vocabulary,
            idf: r.idf,
            config: r.config,
        })
    }
}

/// Fits the vocabulary and idf weights on `docs`.
///
/// The vocabulary keeps the `max_features` n-grams with the highest
/// document frequency (ties by lexicographic order); feature indices are
/// assigned in lexicographic order of the kept n-grams.
pub fn fit_tfidf<S: AsRef<str>>(docs: &[S], config: &TfidfConfig) -> Result<VectorizerModel> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: HashMap<&str, u32> = HashMap::new();
    let mut seen: Vec<&str> = Vec::new();
    for doc in docs {
        seen.clear();
        seen.extend(char_ngrams(doc.as_ref(), config.ngram_min, config.ngram_max));
        seen.sort_unstable();
        seen.dedup();
        for g in &seen {
            *df.entry(g).or_insert(0) += 1;
        }
    }

    let mut ranked: Vec<(&str, u32)> = df.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(config.max_features);
    ranked.sort_unstable_by(|a, b| a.0.cmp(b.0));

    let n_docs = docs.len() as f64;
    let idf = ranked
        .iter()
        .map(|&(_, d)| {
            let d = d as f64;
            if config.idf_smoothing {
                ((1.0 + n_docs) / (1.0 + d)).ln() + 1.0
            } else {
                (n_docs / d).ln() + 1.0
            }
        })
        .collect();
    let terms: Vec<String> = ranked.into_iter().map(|(t, _)| t.to_string()).collect();
    let vocabulary = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    Ok(VectorizerModel {
        terms,
        vocabulary,
        idf,
        config: config.clone(),
    })
}

impl VectorizerModel {
    pub fn config(&self) -> &TfidfConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// N-grams by feature index.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).map(|&i| i as usize)
    }

    /// Raw term count times idf, L2-normalized when configured.
    /// Out-of-vocabulary n-grams are ignored.
    pub fn transform(&self, text: &str) -> SparseVector {
        let pairs: Vec<(u32, f64)> = char_ngrams(text, self.config.ngram_min, self.config.ngram_max)
            .into_iter()
            .filter_map(|g| self.vocabulary.get(g).map(|&i| (i, 1.0)))
            .collect();
        let mut v = SparseVector::from_pairs(pairs);
        v.scale_by(&self.idf);
        if self.config.l2_normalize {
            v.normalize();
        }
        v
    }

    pub fn transform_all<S: AsRef<str>>(&self, docs: &[S]) -> Vec<SparseVector> {
        docs.iter().map(|d| self.transform(d.as_ref())).collect()
    }
}
