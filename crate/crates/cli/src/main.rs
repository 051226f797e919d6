//! `stylo`: ingest review dumps, generate synthetic corpora, run the
//! cross-validated experiment sweeps and print their reports.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 on
//! data and runtime errors.

mod config;

use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use stylo::corpus::{compute_stats, parse_tsv, write_tsv, Corpus, CorpusStats, ParseOptions};
use stylo::evaluation::MethodKind;
use stylo::experiments::{
    emit_report, read_results, run_sweep, write_results_csv, Design, ExperimentConfig, MethodSettings, ResultRow,
    SweepConfig, EXP3_K,
};
use stylo::features::load_embeddings;
use stylo::preprocess::{preprocess, Cleaner, DEFAULT_MIN_CHARS};
use stylo::synthetic::{generate, SyntheticSpec};

use config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "stylo", version, about = "Stylometric authorship attribution experiments")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a review TSV, clean it and save the corpus.
    Ingest(IngestArgs),
    /// Print dataset statistics of a corpus.
    Stats(StatsArgs),
    /// Write a synthetic review TSV.
    Synth(SynthArgs),
    /// Run an experiment sweep and write its reports.
    Run(RunArgs),
    /// Print a results file as CSV or JSON.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Keep reviews whose date starts with this year.
    #[arg(long)]
    year: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MIN_CHARS)]
    min_chars: usize,
    /// Boilerplate pattern file (one regex per line).
    #[arg(long, env = "STYLO_PATTERNS")]
    patterns: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Corpus file from `ingest`, or a review TSV (cleaned on load).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    u: usize,
    #[arg(long, default_value_t = 200)]
    k: usize,
    #[arg(long, default_value_t = 0.9)]
    signature: f64,
    #[arg(long, default_value_t = 0.3)]
    boilerplate: f64,
    #[arg(long, default_value_t = 60)]
    median_chars: usize,
    #[arg(long, default_value_t = 432)]
    p95_chars: usize,
    #[arg(long, default_value_t = 500)]
    vocab: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output TSV; `-` writes to standard output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus file from `ingest`, or a review TSV (cleaned on load).
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_parser = parse_design)]
    design: Option<Design>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<MethodKind>>,
    #[arg(long)]
    u: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "k-max")]
    k_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    u_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    #[arg(long = "k-max-grid", value_delimiter = ',')]
    k_max_grid: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    /// EMB1 embedding file for `emb_lr`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Grid points evaluated concurrently.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// results.json, or the directory containing it.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: ReportFormat,
}

fn parse_design(s: &str) -> Result<Design, String> {
    s.parse().map_err(|e: stylo::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<MethodKind, String> {
    s.parse().map_err(|e: stylo::Error| e.to_string())
}

/// Errors that are the caller's fault rather than the data's.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn cleaner(patterns: Option<&Path>) -> Result<Cleaner> {
    match patterns {
        Some(p) => Cleaner::from_pattern_file(p).with_context(|| format!("loading patterns from {}", p.display())),
        None => Ok(Cleaner::default()),
    }
}

/// Loads a saved corpus, or parses and cleans a review TSV.
fn load_corpus(path: &Path) -> Result<Corpus> {
    let mut head = [0u8; 64];
    let n = fs::File::open(path)
        .and_then(|mut f| f.read(&mut head))
        .with_context(|| format!("opening {}", path.display()))?;
    let first = head[..n].iter().find(|b| !b.is_ascii_whitespace());
    if first == Some(&b'{') {
        return Corpus::load(path).with_context(|| format!("loading corpus {}", path.display()));
    }
    let (raw, parsed) = parse_tsv(path, &ParseOptions::default())?;
    let patterns = std::env::var_os("STYLO_PATTERNS").map(PathBuf::from);
    let (corpus, cleaned) = preprocess(&raw, &cleaner(patterns.as_deref())?, DEFAULT_MIN_CHARS);
    log::info!(
        "parsed {} records ({} skipped), dropped {} short reviews",
        parsed.accepted,
        parsed.skipped,
        cleaned.dropped_short_reviews
    );
    Ok(corpus)
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let options = ParseOptions {
        date_prefix: args.year.clone(),
    };
    let (raw, parsed) = parse_tsv(&args.input, &options)?;
    let (corpus, cleaned) = preprocess(&raw, &cleaner(args.patterns.as_deref())?, args.min_chars);
    if corpus.is_empty() {
        bail!("no reviews left after filtering {}", args.input.display());
    }
    corpus.save(&args.out)?;
    eprintln!(
        "ingest accepted={} skipped={} filtered_out={} boilerplate_spans={} dropped_short={} reviews={} authors={} digest={}",
        parsed.accepted,
        parsed.skipped,
        parsed.filtered_out,
        cleaned.removed_boilerplate_spans,
        cleaned.dropped_short_reviews,
        corpus.len(),
        corpus.num_authors(),
        corpus.digest()
    );
    Ok(())
}

fn format_stats(s: &CorpusStats) -> String {
    let settings = MethodSettings::default();
    let rows = [
        ("Number of authors U", s.num_authors.to_string()),
        ("Total reviews N", s.total_reviews.to_string()),
        (
            "Posts/author (min-median-max)",
            format!("{} - {} - {}", s.posts_per_author_min, s.posts_per_author_median, s.posts_per_author_max),
        ),
        (
            "Posts/author (mean ± SD)",
            format!("{:.2} ± {:.1}", s.posts_per_author_mean, s.posts_per_author_sd),
        ),
        ("Chars/review (median)", format!("{}", s.chars_per_review_median)),
        ("Chars/review (mean)", format!("{:.2}", s.chars_per_review_mean)),
        ("Chars/review (95th percentile)", format!("{}", s.chars_per_review_p95)),
    ];
    let t = &settings.tfidf;
    let m = &settings.metric;
    let defaults = [
        ("Common", "Stratified 5-fold cross-validation (seed=42); Top-k k in {3,5,10}".to_string()),
        (
            "TF-IDF",
            format!("Character {}-gram to {}-gram, max_features={}", t.ngram_min, t.ngram_max, t.max_features),
        ),
        (
            "LR",
            format!("C={:.1}, solver=lbfgs, max_iter={}", settings.logreg.inverse_reg_c, settings.logreg.max_iter),
        ),
        (
            "Metric+kNN",
            format!("BatchHardTripletLoss, normalize=True, kNN: cosine, k={}", m.knn_k),
        ),
    ];
    let mut out = String::new();
    for (label, value) in rows {
        out.push_str(&format!("{label:<32}{value}\n"));
    }
    out.push('\n');
    for (label, value) in defaults {
        out.push_str(&format!("{label:<32}{value}\n"));
    }
    out
}

fn stats(args: &StatsArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let s = compute_stats(&corpus)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&s)?);
    } else {
        print!("{}", format_stats(&s));
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_authors: args.u,
        reviews_per_author: args.k,
        signature_strength: args.signature,
        boilerplate_rate: args.boilerplate,
        median_chars: args.median_chars,
        p95_chars: args.p95_chars,
        shared_topic_vocab_size: args.vocab,
        seed: args.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let corpus = generate(&spec)?;
    if args.out.as_os_str() == "-" {
        let stdout = io::stdout();
        write_tsv(&corpus, BufWriter::new(stdout.lock()))?;
    } else {
        let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
        let mut w = BufWriter::new(file);
        write_tsv(&corpus, &mut w)?;
        w.flush()?;
    }
    eprintln!("synth reviews={} authors={} digest={}", corpus.len(), corpus.num_authors(), corpus.digest());
    Ok(())
}

/// Resolved `run` settings after merging flags, file and defaults.
struct RunPlan {
    corpus: PathBuf,
    sweep: SweepConfig,
    settings: MethodSettings,
    embeddings: Option<PathBuf>,
    workers: usize,
    out: PathBuf,
}

fn resolve_run(args: &RunArgs) -> Result<RunPlan> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p).map_err(|e| usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    let design = match (&args.design, &file.design) {
        (Some(d), _) => *d,
        (None, Some(s)) => parse_design(s).map_err(usage)?,
        (None, None) => Design::Exp1,
    };
    let methods = match (&args.methods, &file.methods) {
        (Some(m), _) => m.clone(),
        (None, Some(v)) => v.iter().map(|s| parse_method(s)).collect::<Result<_, _>>().map_err(usage)?,
        (None, None) => vec![MethodKind::TfidfLr],
    };

    let mut sweep = SweepConfig::for_design(design);
    sweep.methods = methods;
    sweep.seed = args.seed.or(file.seed).unwrap_or(sweep.seed);
    sweep.folds = args.folds.or(file.folds).unwrap_or(sweep.folds);
    sweep.u = args.u.or(file.u).unwrap_or(sweep.u);
    let single = |v: Option<usize>| v.map(|x| vec![x]);
    if let Some(g) = args.u_grid.clone().or(single(args.u)).or(file.u_grid.clone()).or(single(file.u)) {
        sweep.u_grid = g;
    }
    if let Some(g) = args.k_grid.clone().or(single(args.k)).or(file.k_grid.clone()).or(single(file.k)) {
        sweep.k_grid = g;
    }
    if let Some(g) = args
        .k_max_grid
        .clone()
        .or(single(args.k_max))
        .or(file.k_max_grid.clone())
        .or(single(file.k_max))
    {
        sweep.k_max_grid = g;
    }
    if let Some(k) = args.k.or(file.k) {
        if design == Design::Exp3 && k != EXP3_K {
            return Err(usage(format!("EXP3 fixes k = {EXP3_K}")));
        }
        if matches!(design, Design::Exp2a | Design::Exp2b) {
            return Err(usage(format!("{design} does not take k")));
        }
    }
    sweep.grid().map_err(|e| usage(e.to_string()))?;

    let corpus = args
        .corpus
        .clone()
        .or(file.corpus.clone())
        .ok_or_else(|| usage("run needs --corpus"))?;
    let workers = args.workers.or(file.workers).unwrap_or(1);
    if workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    let out = args
        .out
        .clone()
        .or(file.out.clone())
        .ok_or_else(|| usage("run needs --out"))?;
    let settings = MethodSettings {
        tfidf: file.tfidf(),
        logreg: file.logreg(),
        metric: file.metric(),
        embeddings: None,
    };
    settings.tfidf.validate().map_err(|e| usage(e.to_string()))?;
    settings.logreg.validate().map_err(|e| usage(e.to_string()))?;
    settings.metric.validate().map_err(|e| usage(e.to_string()))?;
    Ok(RunPlan {
        corpus,
        sweep,
        settings,
        embeddings: args.embeddings.clone().or(file.embeddings.clone()),
        workers,
        out,
    })
}

fn progress_line(done: usize, total: usize, config: &ExperimentConfig, rows: &[ResultRow]) -> String {
    let opt = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
    let mut line = format!(
        "progress point={done}/{total} design={} U={} k={} K_max={}",
        config.design,
        config.u,
        opt(config.k),
        opt(config.k_max)
    );
    for r in rows {
        line.push_str(&format!(
            " {m}.accuracy_mean={:.6} {m}.top5_mean={:.6} {m}.failed_folds={}",
            r.accuracy_mean,
            r.top5_mean,
            r.failed_folds,
            m = r.method
        ));
    }
    line
}

fn run(args: &RunArgs) -> Result<()> {
    let mut plan = resolve_run(args)?;
    let corpus = load_corpus(&plan.corpus)?;
    if let Some(p) = &plan.embeddings {
        let m = load_embeddings(p).with_context(|| format!("loading embeddings {}", p.display()))?;
        plan.settings.embeddings = Some(Arc::new(m));
    } else if plan.sweep.methods.contains(&MethodKind::EmbLr) {
        return Err(usage("emb_lr needs --embeddings"));
    }
    let total = plan.sweep.grid()?.len();
    let done = AtomicUsize::new(0);
    let rows = run_sweep(&plan.sweep, &corpus, &plan.settings, plan.workers, &|config, rows| {
        let n = done.fetch_add(1, Ordering::SeqCst) + 1;
        eprintln!("{}", progress_line(n, total, config, rows));
    })?;
    for path in emit_report(&rows, &plan.out)? {
        println!("{}", path.display());
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed == rows.len() {
        bail!("every result row failed; see {}", plan.out.join("results.json").display());
    }
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let path = if args.input.is_dir() {
        args.input.join("results.json")
    } else {
        args.input.clone()
    };
    let rows = read_results(&path).with_context(|| format!("reading {}", path.display()))?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match args.format {
        ReportFormat::Csv => write_results_csv(&rows, &mut out)?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<UsageError>().is_some()
            || matches!(c.downcast_ref::<stylo::Error>(), Some(stylo::Error::InvalidConfig(_)))
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Stats(a) => stats(a),
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 1 } else { 2 })
        }
    }
}
