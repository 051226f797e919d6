//! Seeded synthetic review corpora with a tunable author signal.
//!
//! Each author owns a few marker tokens built from CJK Extension A/B
//! ideographs, a range no other text in the generator uses. A review is a
//! run of short clauses over a shared kana topic vocabulary; every clause
//! independently opens with one of its author's markers with probability
//! `signature_strength`. With strength 0 the texts of all authors are drawn
//! from one distribution. Boilerplate sentences (kanji and kana, some with
//! order numbers or URLs) are shared by all authors.

use std::collections::BTreeSet;

use rand::distributions::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Review};
use crate::error::{Error, Result};
use crate::rng;

/// Generated reviews are never shorter than this many code points.
pub const MIN_REVIEW_CHARS: usize = 16;
const MAX_REVIEW_CHARS: usize = 20_000;
const MARKERS_PER_AUTHOR: usize = 3;
const MARKER_CHARS: usize = 3;
const CLAUSE_CHARS: (usize, usize) = (6, 12);
const P95_Z: f64 = 1.644_853_626_951_472_2;

const MARKER_RANGES: [(u32, u32); 2] = [(0x3400, 0x4DBF), (0x20000, 0x2A6DF)];

const BOILERPLATE: [&str; 7] = [
    "迅速な発送ありがとうございました。",
    "梱包も丁寧で安心しました。",
    "ショップの対応がとても良かったです。",
    "またリピートしたいと思います。",
    "注文番号{n}で問い合わせました。",
    "詳細は https://example.com/item/{n} を参照。",
    "ポイント還元がうれしいです。",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_authors: usize,
    pub reviews_per_author: usize,
    /// Per-clause probability of an author marker.
    pub signature_strength: f64,
    /// Per-review probability of a shared boilerplate sentence.
    pub boilerplate_rate: f64,
    pub median_chars: usize,
    pub p95_chars: usize,
    pub shared_topic_vocab_size: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_authors: 10,
            reviews_per_author: 200,
            signature_strength: 0.9,
            boilerplate_rate: 0.3,
            median_chars: 60,
            p95_chars: 432,
            shared_topic_vocab_size: 500,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn max_authors() -> usize {
        let chars: u32 = MARKER_RANGES.iter().map(|(a, b)| b - a + 1).sum();
        chars as usize / (MARKERS_PER_AUTHOR * MARKER_CHARS)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if !unit(self.signature_strength) || !unit(self.boilerplate_rate) {
            return Err(Error::InvalidConfig("probabilities must lie in [0, 1]".into()));
        }
        if self.n_authors == 0 || self.reviews_per_author == 0 {
            return Err(Error::InvalidConfig("need at least one author and one review".into()));
        }
        if self.n_authors > Self::max_authors() {
            return Err(Error::InvalidConfig(format!(
                "at most {} authors have disjoint markers",
                Self::max_authors()
            )));
        }
        if self.median_chars == 0 || self.median_chars > self.p95_chars {
            return Err(Error::InvalidConfig("length median must be positive and at most p95".into()));
        }
        if self.shared_topic_vocab_size == 0 {
            return Err(Error::InvalidConfig("topic vocabulary must be non-empty".into()));
        }
        Ok(())
    }
}

pub fn author_id(author: usize) -> String {
    format!("author{author:05}")
}

fn marker_char(offset: usize) -> char {
    let mut offset = offset as u32;
    for (lo, hi) in MARKER_RANGES {
        let span = hi - lo + 1;
        if offset < span {
            return char::from_u32(lo + offset).expect("ideograph range");
        }
        offset -= span;
    }
    panic!("marker offset outside the ideograph ranges");
}

/// The marker tokens of `author`. Disjoint across authors.
pub fn marker_tokens(author: usize) -> Vec<String> {
    let base = author * MARKERS_PER_AUTHOR * MARKER_CHARS;
    (0..MARKERS_PER_AUTHOR)
        .map(|t| (0..MARKER_CHARS).map(|c| marker_char(base + t * MARKER_CHARS + c)).collect())
        .collect()
}

/// True for code points the generator reserves for author markers.
pub fn is_marker_char(c: char) -> bool {
    MARKER_RANGES.iter().any(|&(lo, hi)| (lo..=hi).contains(&(c as u32)))
}

fn topic_vocabulary(spec: &SyntheticSpec) -> Vec<String> {
    let mut rng = rng::stream(spec.seed, "synthetic-vocabulary", &[]);
    let hiragana = (0x3041u32, 0x3093u32);
    let katakana = (0x30A1u32, 0x30F3u32);
    let mut words = BTreeSet::new();
    let mut out = Vec::with_capacity(spec.shared_topic_vocab_size);
    while out.len() < spec.shared_topic_vocab_size {
        let (lo, hi) = if rng.gen_bool(0.5) { hiragana } else { katakana };
        let len = rng.gen_range(2..=4);
        let w: String = (0..len)
            .map(|_| char::from_u32(rng.gen_range(lo..=hi)).expect("kana range"))
            .collect();
        if words.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

struct Generator<'a> {
    spec: &'a SyntheticSpec,
    vocab: &'a [String],
    zipf: Zipf<f64>,
    lengths: Option<LogNormal<f64>>,
}

impl Generator<'_> {
    fn length(&self, rng: &mut ChaCha8Rng) -> usize {
        let raw = match &self.lengths {
            Some(d) => d.sample(rng).round() as usize,
            None => self.spec.median_chars,
        };
        raw.clamp(MIN_REVIEW_CHARS, MAX_REVIEW_CHARS)
    }

    fn boilerplate(&self, rng: &mut ChaCha8Rng) -> String {
        let template = BOILERPLATE[rng.gen_range(0..BOILERPLATE.len())];
        let n: u64 = rng.gen_range(100_000_000..1_000_000_000);
        template.replace("{n}", &n.to_string())
    }

    fn word(&self, rng: &mut ChaCha8Rng) -> &str {
        let rank = self.zipf.sample(rng) as usize;
        &self.vocab[rank.clamp(1, self.vocab.len()) - 1]
    }

    /// Appends exactly `len` code points of clauses to `out`.
    fn clauses(&self, rng: &mut ChaCha8Rng, markers: &[String], len: usize, out: &mut String) {
        let mut left = len;
        while left > 0 {
            let clause = rng.gen_range(CLAUSE_CHARS.0..=CLAUSE_CHARS.1).min(left);
            let mut body = clause.saturating_sub(1);
            if body >= MARKER_CHARS && rng.gen_bool(self.spec.signature_strength) {
                out.push_str(&markers[rng.gen_range(0..markers.len())]);
                body -= MARKER_CHARS;
            }
            while body > 0 {
                let w = self.word(rng);
                for c in w.chars().take(body) {
                    out.push(c);
                    body -= 1;
                }
            }
            if clause > 0 {
                out.push(if rng.gen_bool(0.3) { '。' } else { '、' });
            }
            left -= clause;
        }
    }

    fn review(&self, rng: &mut ChaCha8Rng, markers: &[String]) -> String {
        let len = self.length(rng);
        let mut text = String::new();
        if rng.gen_bool(self.spec.boilerplate_rate) {
            let b = self.boilerplate(rng);
            let b_len = b.chars().count();
            if b_len + CLAUSE_CHARS.0 <= len {
                if rng.gen_bool(0.5) {
                    text.push_str(&b);
                    self.clauses(rng, markers, len - b_len, &mut text);
                } else {
                    self.clauses(rng, markers, len - b_len, &mut text);
                    text.push_str(&b);
                }
                return text;
            }
        }
        self.clauses(rng, markers, len, &mut text);
        text
    }
}

/// Generates `n_authors * reviews_per_author` reviews, authors in id order.
pub fn generate(spec: &SyntheticSpec) -> Result<Corpus> {
    spec.validate()?;
    let vocab = topic_vocabulary(spec);
    let sigma = (spec.p95_chars as f64 / spec.median_chars as f64).ln() / P95_Z;
    let generator = Generator {
        spec,
        vocab: &vocab,
        zipf: Zipf::new(vocab.len() as u64, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?,
        lengths: if sigma > 0.0 {
            Some(LogNormal::new((spec.median_chars as f64).ln(), sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?)
        } else {
            None
        },
    };

    let per_author: Vec<Vec<Review>> = (0..spec.n_authors)
        .into_par_iter()
        .map(|a| {
            let mut rng = rng::indexed_stream(spec.seed, "synthetic-author", a as u64);
            let markers = marker_tokens(a);
            let id = author_id(a);
            (0..spec.reviews_per_author)
                .map(|j| {
                    let text = generator.review(&mut rng, &markers);
                    let mut r = Review::new(format!("{id}-{j:06}"), id.clone(), text);
                    r.rating = Some(rng.gen_range(1..=5));
                    r.date = Some(format!("2019-{:02}-{:02}", rng.gen_range(1..=12), rng.gen_range(1..=28)));
                    r
                })
                .collect()
        })
        .collect();
    Corpus::new(per_author.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::compute_stats;

    fn small(strength: f64, boilerplate: f64) -> SyntheticSpec {
        SyntheticSpec {
            n_authors: 6,
            reviews_per_author: 40,
            signature_strength: strength,
            boilerplate_rate: boilerplate,
            ..SyntheticSpec::default()
        }
    }

    fn owner(c: char) -> usize {
        let offset = MARKER_RANGES
            .iter()
            .scan(0u32, |acc, &(lo, hi)| {
                let base = *acc;
                *acc += hi - lo + 1;
                Some((lo, hi, base))
            })
            .find(|&(lo, hi, _)| (lo..=hi).contains(&(c as u32)))
            .map(|(lo, _, base)| base + c as u32 - lo)
            .unwrap();
        offset as usize / (MARKERS_PER_AUTHOR * MARKER_CHARS)
    }

    #[test]
    fn markers_are_disjoint() {
        let a: BTreeSet<char> = marker_tokens(0).concat().chars().collect();
        let b: BTreeSet<char> = marker_tokens(1).concat().chars().collect();
        assert_eq!(a.len(), MARKERS_PER_AUTHOR * MARKER_CHARS);
        assert!(a.is_disjoint(&b));
        let last = SyntheticSpec::max_authors() - 1;
        assert!(marker_tokens(last).concat().chars().all(is_marker_char));
    }

    #[test]
    fn full_signal_is_detectable_by_rule() {
        let c = generate(&small(1.0, 0.0)).unwrap();
        let (classes, y) = c.labels();
        for (r, &label) in c.reviews().iter().zip(&y) {
            let owners: BTreeSet<usize> = r.text.chars().filter(|&ch| is_marker_char(ch)).map(owner).collect();
            assert_eq!(owners.len(), 1, "{}", r.text);
            assert_eq!(author_id(*owners.iter().next().unwrap()), classes[label]);
        }
    }

    #[test]
    fn zero_signal_has_no_markers() {
        let c = generate(&small(0.0, 0.5)).unwrap();
        assert!(c.reviews().iter().all(|r| !r.text.chars().any(is_marker_char)));
    }

    #[test]
    fn markers_stay_with_their_author() {
        let c = generate(&small(0.5, 0.0)).unwrap();
        for r in c.reviews() {
            for ch in r.text.chars().filter(|&ch| is_marker_char(ch)) {
                assert_eq!(author_id(owner(ch)), r.author_id);
            }
        }
    }

    #[test]
    fn shape_and_determinism() {
        let spec = small(0.7, 0.3);
        let a = generate(&spec).unwrap();
        assert_eq!(a.len(), 240);
        assert_eq!(a.num_authors(), 6);
        assert_eq!(a.digest(), generate(&spec).unwrap().digest());
        let other = SyntheticSpec { seed: 7, ..spec };
        assert_ne!(a.digest(), generate(&other).unwrap().digest());
        assert!(a.reviews().iter().all(|r| r.char_len() >= MIN_REVIEW_CHARS));
    }

    #[test]
    fn boilerplate_appears_at_roughly_the_configured_rate() {
        let c = generate(&SyntheticSpec { boilerplate_rate: 0.5, ..small(0.5, 0.5) }).unwrap();
        let hits = c
            .reviews()
            .iter()
            .filter(|r| BOILERPLATE.iter().any(|b| r.text.contains(b.split('{').next().unwrap())))
            .count() as f64;
        let rate = hits / c.len() as f64;
        assert!((0.3..0.6).contains(&rate), "{rate}");
    }

    #[test]
    fn length_quantiles_follow_the_spec() {
        let spec = SyntheticSpec {
            n_authors: 20,
            reviews_per_author: 250,
            ..SyntheticSpec::default()
        };
        let s = compute_stats(&generate(&spec).unwrap()).unwrap();
        let close = |got: f64, want: usize| (got - want as f64).abs() <= 0.1 * want as f64;
        assert!(close(s.chars_per_review_median, 60), "{}", s.chars_per_review_median);
        assert!(close(s.chars_per_review_p95, 432), "{}", s.chars_per_review_p95);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for bad in [
            SyntheticSpec { signature_strength: 1.5, ..SyntheticSpec::default() },
            SyntheticSpec { median_chars: 500, p95_chars: 100, ..SyntheticSpec::default() },
            SyntheticSpec { n_authors: 0, ..SyntheticSpec::default() },
            SyntheticSpec { n_authors: SyntheticSpec::max_authors() + 1, ..SyntheticSpec::default() },
        ] {
            assert!(generate(&bad).is_err());
        }
    }
}
