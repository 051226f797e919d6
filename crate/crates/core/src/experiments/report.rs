use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Design, ResultRow};
use crate::error::{Error, Result};
use crate::evaluation::MethodKind;

/// The flat results.csv record. Missing values are empty fields; metrics
/// of failed rows are `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub design: Design,
    #[serde(rename = "U")]
    pub u: usize,
    pub k: Option<usize>,
    #[serde(rename = "K_max")]
    pub k_max: Option<usize>,
    pub method: MethodKind,
    pub accuracy_mean: f64,
    pub accuracy_sd: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_sd: f64,
    pub top3_mean: f64,
    pub top5_mean: f64,
    pub top10_mean: f64,
    pub train_seconds_mean: f64,
    pub infer_seconds_mean: f64,
    pub corpus_hash: Option<String>,
    pub failed_folds: usize,
}

impl From<&ResultRow> for SummaryRow {
    fn from(r: &ResultRow) -> Self {
        SummaryRow {
            design: r.design,
            u: r.u,
            k: r.k,
            k_max: r.k_max,
            method: r.method,
            accuracy_mean: r.accuracy_mean,
            accuracy_sd: r.accuracy_sd,
            macro_f1_mean: r.macro_f1_mean,
            macro_f1_sd: r.macro_f1_sd,
            top3_mean: r.top3_mean,
            top5_mean: r.top5_mean,
            top10_mean: r.top10_mean,
            train_seconds_mean: r.train_seconds_mean,
            infer_seconds_mean: r.infer_seconds_mean,
            corpus_hash: r.corpus_hash.clone(),
            failed_folds: r.failed_folds,
        }
    }
}

const PLOT_METRICS: [&str; 9] = [
    "accuracy_mean",
    "accuracy_sd",
    "macro_f1_mean",
    "macro_f1_sd",
    "top3_mean",
    "top5_mean",
    "top10_mean",
    "train_seconds_mean",
    "infer_seconds_mean",
];

fn plot_values(r: &ResultRow) -> [f64; 9] {
    [
        r.accuracy_mean,
        r.accuracy_sd,
        r.macro_f1_mean,
        r.macro_f1_sd,
        r.top3_mean,
        r.top5_mean,
        r.top10_mean,
        r.train_seconds_mean,
        r.infer_seconds_mean,
    ]
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(SummaryRow::from(r))?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
    Ok(())
}

fn write_plot<W: Write>(axis: &str, rows: &[&ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![axis, "method"];
    header.extend(PLOT_METRICS);
    w.write_record(&header)?;
    for r in rows {
        let x = r.sweep_value().expect("sweep design").to_string();
        let mut record = vec![x, r.method.to_string()];
        record.extend(plot_values(r).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `results.json`, `results.csv`, and one `plot_<design>.csv` per
/// swept design (one line per grid value and method). Returns the paths
/// written.
pub fn emit_report(rows: &[ResultRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no result rows to report".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let json = out_dir.join("results.json");
    let mut w = create(&json)?;
    serde_json::to_writer_pretty(&mut w, rows)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(&json, e))?;
    written.push(json);

    let csv_path = out_dir.join("results.csv");
    write_results_csv(rows, create(&csv_path)?)?;
    written.push(csv_path);

    let mut by_design: BTreeMap<Design, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_design.entry(r.design).or_default().push(r);
    }
    for (design, mut group) in by_design {
        let Some(axis) = design.sweep_axis() else { continue };
        group.sort_by_key(|r| (r.sweep_value(), r.method));
        let path = out_dir.join(format!("plot_{}.csv", design.as_str().to_lowercase()));
        write_plot(axis, &group, create(&path)?)?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
