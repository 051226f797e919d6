//! The three experiment designs and their parameter sweeps.
//!
//! * `EXP1`: top-`U` authors, `k` reviews sampled per author, `k` swept.
//! * `EXP2A`: top-`U` authors with all their reviews (natural imbalance).
//! * `EXP2B`: top-`U` authors capped at `K_max` reviews each, `K_max` swept.
//! * `EXP3`: `k = 186` reviews per author, the author count `U` swept.
//!
//! Within a grid point every method sees the same corpus and fold plan.

mod report;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{cap_per_author, sample_per_author, select_top_authors, Corpus};
use crate::error::{Error, Result};
use crate::evaluation::{
    run_cv, stratified_kfold, EmbeddingLr, EvalReport, Method, MethodKind, MetricKnn, TfidfLr, TOP_K_SET,
};
use crate::features::{DenseMatrix, TfidfConfig};
use crate::linear::LogRegConfig;
use crate::metric::MetricConfig;

pub use report::{emit_report, read_results, write_results_csv, SummaryRow};

pub const EXP1_K_GRID: [usize; 4] = [100, 200, 300, 400];
pub const EXP2B_K_MAX_GRID: [usize; 3] = [500, 1000, 1500];
pub const EXP3_U_GRID: [usize; 11] = [2, 5, 10, 20, 50, 100, 200, 400, 600, 800, 1000];
/// Reviews per author in the scaling design: the smallest per-author count
/// among the top 1,000 authors.
pub const EXP3_K: usize = 186;
pub const DEFAULT_U: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Design {
    #[serde(rename = "EXP1")]
    Exp1,
    #[serde(rename = "EXP2A")]
    Exp2a,
    #[serde(rename = "EXP2B")]
    Exp2b,
    #[serde(rename = "EXP3")]
    Exp3,
}

impl Design {
    pub fn as_str(self) -> &'static str {
        match self {
            Design::Exp1 => "EXP1",
            Design::Exp2a => "EXP2A",
            Design::Exp2b => "EXP2B",
            Design::Exp3 => "EXP3",
        }
    }

    /// Name of the swept parameter, if the design has a sweep.
    pub fn sweep_axis(self) -> Option<&'static str> {
        match self {
            Design::Exp1 => Some("k"),
            Design::Exp2a => None,
            Design::Exp2b => Some("K_max"),
            Design::Exp3 => Some("U"),
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EXP1" => Ok(Design::Exp1),
            "EXP2A" => Ok(Design::Exp2a),
            "EXP2B" => Ok(Design::Exp2b),
            "EXP3" => Ok(Design::Exp3),
            _ => Err(Error::InvalidConfig(format!("unknown design {s:?} (expected exp1, exp2a, exp2b or exp3)"))),
        }
    }
}

/// One grid point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: Design,
    #[serde(rename = "U")]
    pub u: usize,
    pub k: Option<usize>,
    #[serde(rename = "K_max")]
    pub k_max: Option<usize>,
    pub methods: Vec<MethodKind>,
    pub seed: u64,
    pub folds: usize,
    pub top_k_set: Vec<usize>,
}

impl ExperimentConfig {
    pub fn new(design: Design, u: usize) -> Self {
        ExperimentConfig {
            design,
            u,
            k: (design == Design::Exp3).then_some(EXP3_K),
            k_max: None,
            methods: vec![MethodKind::TfidfLr],
            seed: 42,
            folds: 5,
            top_k_set: TOP_K_SET.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.u < 2 {
            return bad(format!("U = {} but attribution needs at least 2 authors", self.u));
        }
        if self.folds < 2 {
            return bad("need at least 2 folds".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.top_k_set != TOP_K_SET {
            return bad(format!("top-k set is fixed at {TOP_K_SET:?}"));
        }
        match self.design {
            Design::Exp1 => match self.k {
                Some(k) if EXP1_K_GRID.contains(&k) => {}
                k => return bad(format!("EXP1 needs k in {EXP1_K_GRID:?}, got {k:?}")),
            },
            Design::Exp3 if self.k != Some(EXP3_K) => {
                return bad(format!("EXP3 fixes k = {EXP3_K}, got {:?}", self.k));
            }
            Design::Exp2b if self.k_max.is_none() => return bad("EXP2B needs K_max".into()),
            _ => {}
        }
        if matches!(self.design, Design::Exp2a | Design::Exp2b) && self.k.is_some() {
            return bad(format!("{} does not sample a fixed k", self.design));
        }
        if self.design != Design::Exp2b && self.k_max.is_some() {
            return bad(format!("{} does not use K_max", self.design));
        }
        Ok(())
    }
}

/// Builds the evaluation corpus of one grid point from a preprocessed base.
pub fn build_experiment_corpus(base: &Corpus, config: &ExperimentConfig) -> Result<Corpus> {
    config.validate()?;
    let top = select_top_authors(base, config.u)?;
    match config.design {
        Design::Exp1 | Design::Exp3 => sample_per_author(&top, config.k.expect("validated"), config.seed, false),
        Design::Exp2a => Ok(top),
        Design::Exp2b => cap_per_author(&top, config.k_max.expect("validated"), config.seed),
    }
}

/// A design with its sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub design: Design,
    pub methods: Vec<MethodKind>,
    /// Author count for EXP1 and EXP2.
    #[serde(rename = "U")]
    pub u: usize,
    pub u_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub k_max_grid: Vec<usize>,
    pub seed: u64,
    pub folds: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::for_design(Design::Exp1)
    }
}

impl SweepConfig {
    pub fn for_design(design: Design) -> Self {
        SweepConfig {
            design,
            methods: vec![MethodKind::TfidfLr],
            u: DEFAULT_U,
            u_grid: EXP3_U_GRID.to_vec(),
            k_grid: EXP1_K_GRID.to_vec(),
            k_max_grid: EXP2B_K_MAX_GRID.to_vec(),
            seed: 42,
            folds: 5,
        }
    }

    /// Grid points in ascending order of the swept parameter.
    pub fn grid(&self) -> Result<Vec<ExperimentConfig>> {
        let point = |u: usize, k: Option<usize>, k_max: Option<usize>| ExperimentConfig {
            design: self.design,
            u,
            k,
            k_max,
            methods: self.methods.clone(),
            seed: self.seed,
            folds: self.folds,
            top_k_set: TOP_K_SET.to_vec(),
        };
        let sorted = |v: &[usize]| {
            let mut v = v.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        };
        let grid: Vec<ExperimentConfig> = match self.design {
            Design::Exp1 => sorted(&self.k_grid).into_iter().map(|k| point(self.u, Some(k), None)).collect(),
            Design::Exp2a => vec![point(self.u, None, None)],
            Design::Exp2b => sorted(&self.k_max_grid).into_iter().map(|m| point(self.u, None, Some(m))).collect(),
            Design::Exp3 => sorted(&self.u_grid).into_iter().map(|u| point(u, Some(EXP3_K), None)).collect(),
        };
        if grid.is_empty() {
            return Err(Error::InvalidConfig(format!("{} sweep grid is empty", self.design)));
        }
        for c in &grid {
            c.validate()?;
        }
        Ok(grid)
    }
}

/// Hyperparameters shared by every grid point, plus imported embeddings
/// for `emb_lr`.
#[derive(Debug, Clone, Default)]
pub struct MethodSettings {
    pub tfidf: TfidfConfig,
    pub logreg: LogRegConfig,
    pub metric: MetricConfig,
    pub embeddings: Option<Arc<DenseMatrix>>,
}

impl MethodSettings {
    pub fn build(&self, kind: MethodKind, seed: u64) -> Result<Box<dyn Method>> {
        Ok(match kind {
            MethodKind::TfidfLr => Box::new(TfidfLr {
                tfidf: self.tfidf.clone(),
                logreg: self.logreg.clone(),
            }),
            MethodKind::EmbLr => {
                let embeddings = self.embeddings.clone().ok_or_else(|| {
                    Error::InvalidConfig("emb_lr needs an embedding file".into())
                })?;
                Box::new(EmbeddingLr {
                    embeddings,
                    logreg: self.logreg.clone(),
                })
            }
            MethodKind::MetricKnn => Box::new(MetricKnn {
                tfidf: self.tfidf.clone(),
                metric: MetricConfig {
                    seed,
                    ..self.metric.clone()
                },
                max_k_eval: TOP_K_SET[TOP_K_SET.len() - 1],
            }),
        })
    }
}

/// One (grid point, method) outcome. Metric fields repeat the report
/// aggregates; they are NaN when the row failed before evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub design: Design,
    #[serde(rename = "U")]
    pub u: usize,
    pub k: Option<usize>,
    #[serde(rename = "K_max")]
    pub k_max: Option<usize>,
    pub method: MethodKind,
    pub seed: u64,
    pub folds: usize,
    pub corpus_hash: Option<String>,
    pub n_samples: usize,
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
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
}

impl ResultRow {
    fn failed(config: &ExperimentConfig, method: MethodKind, corpus_hash: Option<String>, n: usize, e: &Error) -> Self {
        log::warn!("{} U={} {method}: {e}", config.design, config.u);
        ResultRow {
            design: config.design,
            u: config.u,
            k: config.k,
            k_max: config.k_max,
            method,
            seed: config.seed,
            folds: config.folds,
            corpus_hash,
            n_samples: n,
            accuracy_mean: f64::NAN,
            accuracy_sd: f64::NAN,
            macro_f1_mean: f64::NAN,
            macro_f1_sd: f64::NAN,
            top3_mean: f64::NAN,
            top5_mean: f64::NAN,
            top10_mean: f64::NAN,
            train_seconds_mean: f64::NAN,
            infer_seconds_mean: f64::NAN,
            failed_folds: config.folds,
            error: Some(e.to_string()),
            report: None,
        }
    }

    fn from_report(config: &ExperimentConfig, method: MethodKind, corpus_hash: String, report: EvalReport) -> Self {
        ResultRow {
            design: config.design,
            u: config.u,
            k: config.k,
            k_max: config.k_max,
            method,
            seed: config.seed,
            folds: config.folds,
            corpus_hash: Some(corpus_hash),
            n_samples: report.n_samples,
            accuracy_mean: report.accuracy_mean,
            accuracy_sd: report.accuracy_sd,
            macro_f1_mean: report.macro_f1_mean,
            macro_f1_sd: report.macro_f1_sd,
            top3_mean: report.top3_mean,
            top5_mean: report.top5_mean,
            top10_mean: report.top10_mean,
            train_seconds_mean: report.train_seconds_mean,
            infer_seconds_mean: report.infer_seconds_mean,
            failed_folds: report.failed_folds,
            error: None,
            report: Some(report),
        }
    }

    /// The grid point this row came from, restricted to its own method.
    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            design: self.design,
            u: self.u,
            k: self.k,
            k_max: self.k_max,
            methods: vec![self.method],
            seed: self.seed,
            folds: self.folds,
            top_k_set: TOP_K_SET.to_vec(),
        }
    }

    /// Value of the design's swept parameter.
    pub fn sweep_value(&self) -> Option<usize> {
        match self.design {
            Design::Exp1 => self.k,
            Design::Exp2a => None,
            Design::Exp2b => self.k_max,
            Design::Exp3 => Some(self.u),
        }
    }
}

/// Runs every method of one grid point on a shared corpus and fold plan.
///
/// Failures are confined to rows: a corpus that cannot be built fails
/// every method of the point, a method that cannot be built fails its row.
pub fn run_experiment(config: &ExperimentConfig, base: &Corpus, settings: &MethodSettings) -> Vec<ResultRow> {
    let fail_all = |hash: Option<String>, n: usize, e: &Error| -> Vec<ResultRow> {
        config
            .methods
            .iter()
            .map(|&m| ResultRow::failed(config, m, hash.clone(), n, e))
            .collect()
    };
    let corpus = match build_experiment_corpus(base, config) {
        Ok(c) => c,
        Err(e) => return fail_all(None, 0, &e),
    };
    let hash = corpus.digest();
    let (_, labels) = corpus.labels();
    let plan = match stratified_kfold(&labels, config.folds, config.seed) {
        Ok(p) => p,
        Err(e) => return fail_all(Some(hash), corpus.len(), &e),
    };
    config
        .methods
        .iter()
        .map(|&kind| {
            let outcome = settings.build(kind, config.seed).and_then(|m| run_cv(m.as_ref(), &corpus, &plan));
            match outcome {
                Ok(report) => ResultRow::from_report(config, kind, hash.clone(), report),
                Err(e) => ResultRow::failed(config, kind, Some(hash.clone()), corpus.len(), &e),
            }
        })
        .collect()
}

/// Runs a whole sweep with at most `workers` grid points in flight.
///
/// `on_point` is called once per finished grid point, in completion
/// order; the returned rows are in grid order.
pub fn run_sweep(
    sweep: &SweepConfig,
    base: &Corpus,
    settings: &MethodSettings,
    workers: usize,
    on_point: &(dyn Fn(&ExperimentConfig, &[ResultRow]) + Sync),
) -> Result<Vec<ResultRow>> {
    let grid = sweep.grid()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let rows: Vec<Vec<ResultRow>> = pool.install(|| {
        grid.par_iter()
            .map(|config| {
                let rows = run_experiment(config, base, settings);
                on_point(config, &rows);
                rows
            })
            .collect()
    });
    Ok(rows.into_iter().flatten().collect())
}
