use stylo::corpus::{compute_stats, parse_tsv_reader, write_tsv, ParseOptions};
use stylo::evaluation::MethodKind;
use stylo::experiments::{build_experiment_corpus, emit_report, read_results, run_sweep, Design, MethodSettings, SweepConfig};
use stylo::preprocess::{preprocess, Cleaner, DEFAULT_MIN_CHARS};
use stylo::synthetic::{generate, SyntheticSpec};

fn spec(n_authors: usize, reviews_per_author: usize) -> SyntheticSpec {
    SyntheticSpec {
        n_authors,
        reviews_per_author,
        ..SyntheticSpec::default()
    }
}

#[test]
fn synthetic_tsv_round_trips_through_the_parser() {
    let corpus = generate(&spec(5, 30)).unwrap();
    let mut buf = Vec::new();
    write_tsv(&corpus, &mut buf).unwrap();
    let (parsed, report) = parse_tsv_reader(buf.as_slice(), &ParseOptions::default()).unwrap();
    assert_eq!(report.accepted, 150);
    assert_eq!(report.skipped, 0);
    assert_eq!(parsed.digest(), corpus.digest());

    let year = ParseOptions {
        date_prefix: Some("2018".into()),
    };
    let (none, report) = parse_tsv_reader(buf.as_slice(), &year).unwrap();
    assert!(none.is_empty());
    assert_eq!(report.filtered_out, 150);
}

#[test]
fn cleaning_strips_generated_boilerplate_identifiers() {
    let corpus = generate(&SyntheticSpec {
        boilerplate_rate: 1.0,
        ..spec(4, 50)
    })
    .unwrap();
    let (clean, report) = preprocess(&corpus, &Cleaner::default(), DEFAULT_MIN_CHARS);
    assert!(report.removed_boilerplate_spans > 0);
    for r in clean.reviews() {
        assert!(!r.text.contains("https://"), "{}", r.text);
        assert!(!r.text.chars().collect::<Vec<_>>().windows(9).any(|w| w.iter().all(char::is_ascii_digit)));
    }
    assert!(clean.reviews().iter().all(|r| r.char_len() >= DEFAULT_MIN_CHARS));
}

#[test]
fn stats_of_a_balanced_corpus() {
    let s = compute_stats(&generate(&spec(4, 25)).unwrap()).unwrap();
    assert_eq!(s.num_authors, 4);
    assert_eq!(s.total_reviews, 100);
    assert_eq!((s.posts_per_author_min, s.posts_per_author_max), (25, 25));
    assert_eq!(s.posts_per_author_sd, 0.0);
}

#[test]
fn exp1_sweep_end_to_end() {
    let base = generate(&spec(4, 220)).unwrap();
    let (base, _) = preprocess(&base, &Cleaner::default(), DEFAULT_MIN_CHARS);
    let mut sweep = SweepConfig::for_design(Design::Exp1);
    sweep.u = 3;
    sweep.k_grid = vec![100, 200];
    sweep.methods = vec![MethodKind::TfidfLr];
    let rows = run_sweep(&sweep, &base, &MethodSettings::default(), 1, &|_, _| {}).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r.error.is_none());
        assert!(r.accuracy_mean > 0.9, "{}", r.accuracy_mean);
        let rebuilt = build_experiment_corpus(&base, &r.config()).unwrap();
        assert_eq!(Some(rebuilt.digest()), r.corpus_hash);
        assert_eq!(rebuilt.len(), 3 * r.k.unwrap());
    }

    let dir = tempfile::tempdir().unwrap();
    emit_report(&rows, dir.path()).unwrap();
    assert_eq!(read_results(&dir.path().join("results.json")).unwrap(), rows);
    let plot = std::fs::read_to_string(dir.path().join("plot_exp1.csv")).unwrap();
    assert_eq!(plot.lines().count(), 3);
}
