//! Text cleaning and short-review filtering.
//!
//! Cleaning is NFKC normalization, removal of boilerplate spans (URLs,
//! order numbers, long digit runs) and whitespace collapsing. The length
//! filter runs on cleaned text.

use std::fs;
use std::path::Path;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Corpus, Review};
use crate::error::{Error, Result};

/// Built-in pattern file.
pub const DEFAULT_PATTERNS: &str = include_str!("../patterns/boilerplate.txt");

/// Reviews with this many code points or fewer are dropped.
pub const DEFAULT_MIN_CHARS: usize = 11;

// Upper bound on clean-until-stable rounds; real text settles in one or two.
const MAX_ROUNDS: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleaningReport {
    pub removed_boilerplate_spans: usize,
    pub normalized_whitespace_runs: usize,
    pub dropped_short_reviews: usize,
}

impl std::ops::AddAssign for CleaningReport {
    fn add_assign(&mut self, rhs: Self) {
        self.removed_boilerplate_spans += rhs.removed_boilerplate_spans;
        self.normalized_whitespace_runs += rhs.normalized_whitespace_runs;
        self.dropped_short_reviews += rhs.dropped_short_reviews;
    }
}

#[derive(Debug, Clone)]
pub struct Cleaner {
    patterns: Vec<Regex>,
}

impl Default for Cleaner {
    fn default() -> Self {
        Cleaner::from_pattern_text(DEFAULT_PATTERNS).expect("built-in patterns compile")
    }
}

impl Cleaner {
    pub fn from_pattern_text(text: &str) -> Result<Self> {
        let mut patterns = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let re = Regex::new(line).map_err(|e| Error::Pattern {
                line: i + 1,
                message: e.to_string(),
            })?;
            patterns.push(re);
        }
        Ok(Cleaner { patterns })
    }

    pub fn from_pattern_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_pattern_text(&text)
    }

    pub fn patterns(&self) -> &[Regex] {
        &self.patterns
    }

    pub fn clean(&self, text: &str) -> String {
        self.clean_with_report(text).0
    }

    /// Cleans `text`, repeating until the output is stable so that
    /// `clean(clean(x)) == clean(x)` even when a removal splices together
    /// a new match.
    pub fn clean_with_report(&self, text: &str) -> (String, CleaningReport) {
        let mut report = CleaningReport::default();
        let mut current = self.clean_once(text, &mut report);
        for _ in 1..MAX_ROUNDS {
            let next = self.clean_once(&current, &mut report);
            if next == current {
                break;
            }
            current = next;
        }
        (current, report)
    }

    fn clean_once(&self, text: &str, report: &mut CleaningReport) -> String {
        let mut s: String = text.nfkc().collect();
        for re in &self.patterns {
            let n = re.find_iter(&s).count();
            if n > 0 {
                report.removed_boilerplate_spans += n;
                s = re.replace_all(&s, " ").into_owned();
            }
        }
        collapse_whitespace(&s, report)
    }

    pub fn clean_corpus(&self, corpus: &Corpus) -> (Corpus, CleaningReport) {
        let mut report = CleaningReport::default();
        let cleaned = corpus.filter_map(|r| {
            let (text, rep) = self.clean_with_report(&r.text);
            report += rep;
            if text.is_empty() {
                report.dropped_short_reviews += 1;
                return None;
            }
            Some(Review { text, ..r.clone() })
        });
        (cleaned, report)
    }
}

fn collapse_whitespace(s: &str, report: &mut CleaningReport) -> String {
    let mut out = String::with_capacity(s.len());
    let mut run = String::new();
    let mut seen_text = false;
    for c in s.chars() {
        if c.is_whitespace() {
            run.push(c);
            continue;
        }
        if !run.is_empty() {
            if !seen_text || run != " " {
                report.normalized_whitespace_runs += 1;
            }
            if seen_text {
                out.push(' ');
            }
            run.clear();
        }
        seen_text = true;
        out.push(c);
    }
    if !run.is_empty() {
        report.normalized_whitespace_runs += 1;
    }
    out
}

/// Cleans with the built-in pattern set.
pub fn clean_text(text: &str) -> String {
    thread_local! {
        static DEFAULT: Cleaner = Cleaner::default();
    }
    DEFAULT.with(|c| c.clean(text))
}

/// Drops reviews shorter than `min_chars` code points; authors left without
/// reviews disappear from the index.
pub fn filter_short(corpus: &Corpus, min_chars: usize) -> (Corpus, usize) {
    let mut dropped = 0;
    let kept = corpus.filter_map(|r| {
        if r.char_len() >= min_chars {
            Some(r.clone())
        } else {
            dropped += 1;
            None
        }
    });
    (kept, dropped)
}

/// Clean then filter, in that fixed order.
pub fn preprocess(corpus: &Corpus, cleaner: &Cleaner, min_chars: usize) -> (Corpus, CleaningReport) {
    let (cleaned, mut report) = cleaner.clean_corpus(corpus);
    let (kept, dropped) = filter_short(&cleaned, min_chars);
    report.dropped_short_reviews += dropped;
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn collapses_whitespace() {
        assert_eq!(clean_text("good\n\nitem\t!"), "good item !");
        assert_eq!(clean_text("  lead and trail \r\n"), "lead and trail");
        assert_eq!(clean_text("全角\u{3000}空白"), "全角 空白");
    }

    #[test]
    fn removes_urls() {
        assert_eq!(clean_text("see https://x.example/a now"), "see now");
        assert_eq!(clean_text("http://a.b/c"), "");
    }

    // Independent check of the order-number rule: label, optional
    // separator, then six or more ASCII digits.
    fn order_number_span(s: &str) -> Option<(usize, usize)> {
        let start = s.find("注文番号")?;
        let rest = &s[start + "注文番号".len()..];
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        (digits >= 6).then(|| (start, start + "注文番号".len() + digits))
    }

    #[test]
    fn removes_order_numbers() {
        let input = "注文番号123456789 届いた";
        let (a, b) = order_number_span(input).unwrap();
        let oracle = format!("{}{}", &input[..a], &input[b..]).trim().to_string();
        assert_eq!(oracle, "届いた");
        assert_eq!(clean_text(input), oracle);

        assert_eq!(clean_text("受注番号:1234567 ありがとう"), "ありがとう");
        assert_eq!(clean_text("Order No. 987654 arrived"), "arrived");
        // full-width digits normalize to ASCII first
        assert_eq!(clean_text("注文番号１２３４５６ 了解"), "了解");
        // too few digits stays
        assert_eq!(clean_text("注文番号12345 了解"), "注文番号12345 了解");
        assert_eq!(clean_text("call 0312345678 now"), "call now");
    }

    #[test]
    fn removed_spans_do_not_splice_neighbours() {
        let s = "x 注文注文番号123456番号654321 y";
        let once = clean_text(s);
        assert_eq!(once, "x 注文 番号654321 y");
        assert_eq!(clean_text(&once), once);
    }

    #[test]
    fn report_counts_spans_and_runs() {
        let c = Cleaner::default();
        let (out, rep) = c.clean_with_report("a  b https://q.r c\n");
        assert_eq!(out, "a b c");
        assert_eq!(rep.removed_boilerplate_spans, 1);
        assert!(rep.normalized_whitespace_runs >= 2);
    }

    #[test]
    fn custom_pattern_file() {
        let c = Cleaner::from_pattern_text("# v1\n\nお届け予定\n").unwrap();
        assert_eq!(c.clean("お届け予定 良い"), "良い");
        let err = Cleaner::from_pattern_text("# ok\n(unclosed\n").unwrap_err();
        assert!(matches!(err, Error::Pattern { line: 2, .. }));
    }

    fn review(id: &str, author: &str, text: &str) -> Review {
        Review::new(id, author, text)
    }

    #[test]
    fn filter_boundary() {
        let c = Corpus::new(vec![
            review("1", "a", "0123456789"),
            review("2", "a", "あいうえおかきくけこさ"),
            review("3", "b", "short one"),
        ])
        .unwrap();
        let (kept, dropped) = filter_short(&c, DEFAULT_MIN_CHARS);
        assert_eq!(dropped, 2);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.reviews()[0].review_id, "2");
        assert_eq!(kept.authors().collect::<Vec<_>>(), ["a"]);
    }

    #[test]
    fn length_is_measured_after_cleaning() {
        let c = Corpus::new(vec![
            review("1", "a", "ok https://example.com/very/long/path/here"),
            review("2", "a", "this one is long enough"),
        ])
        .unwrap();
        let (out, rep) = preprocess(&c, &Cleaner::default(), DEFAULT_MIN_CHARS);
        assert_eq!(out.len(), 1);
        assert_eq!(rep.dropped_short_reviews, 1);
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(s in "(\\PC|[ \t\n\u{3000}0-9:/]|注文番号|https://|\u{301}){0,60}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once);
        }

        #[test]
        fn clean_is_idempotent_any_string(s in any::<String>()) {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once);
        }

        #[test]
        fn filtered_reviews_are_long_enough(texts in prop::collection::vec("[a-zあ-ん ]{0,20}", 1..30)) {
            let reviews: Vec<Review> = texts
                .iter()
                .enumerate()
                .filter(|(_, t)| !t.is_empty())
                .map(|(i, t)| review(&i.to_string(), &format!("a{}", i % 3), t))
                .collect();
            let c = Corpus::new(reviews).unwrap();
            let (kept, _) = filter_short(&c, DEFAULT_MIN_CHARS);
            prop_assert!(kept.reviews().iter().all(|r| r.char_len() > 10));
        }
    }
}
