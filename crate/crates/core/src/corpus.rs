//! Review corpora: TSV ingestion, author indexing, author selection,
//! per-author sampling and capping, and descriptive statistics.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;

const CORPUS_FORMAT: &str = "stylo-corpus";
const CORPUS_VERSION: u32 = 1;

/// One authored text unit. The reviewer ID doubles as the author label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub author_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

impl Review {
    pub fn new(
        review_id: impl Into<String>,
        author_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        Review {
            review_id: review_id.into(),
            author_id: author_id.into(),
            text: text.into(),
            rating: None,
            date: None,
        }
    }

    /// Length in Unicode code points.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// An ordered collection of reviews with a per-author position index.
///
/// Immutable once built; every operation returns a new corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
#[derive(Default)]
pub struct Corpus {
    reviews: Vec<Review>,
    author_index: BTreeMap<String, Vec<usize>>,
}


impl Corpus {
    pub fn new(reviews: Vec<Review>) -> Result<Self> {
        for r in &reviews {
            if r.author_id.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "review {} has an empty author_id",
                    r.review_id
                )));
            }
            if r.text.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "review {} has empty text",
                    r.review_id
                )));
            }
        }
        Ok(Self::from_valid(reviews))
    }

    fn from_valid(reviews: Vec<Review>) -> Self {
        let mut author_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (pos, r) in reviews.iter().enumerate() {
            author_index.entry(r.author_id.clone()).or_default().push(pos);
        }
        Corpus {
            reviews,
            author_index,
        }
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn into_reviews(self) -> Vec<Review> {
        self.reviews
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn num_authors(&self) -> usize {
        self.author_index.len()
    }

    /// Author ids in lexicographic order.
    pub fn authors(&self) -> impl Iterator<Item = &str> {
        self.author_index.keys().map(String::as_str)
    }

    pub fn positions_of(&self, author_id: &str) -> Option<&[usize]> {
        self.author_index.get(author_id).map(Vec::as_slice)
    }

    pub fn author_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.author_index
    }

    /// Class labels (sorted author ids) and the class index of every review.
    pub fn labels(&self) -> (Vec<String>, Vec<usize>) {
        let classes: Vec<String> = self.author_index.keys().cloned().collect();
        let mut y = vec![0; self.reviews.len()];
        for (class, positions) in self.author_index.values().enumerate() {
            for &p in positions {
                y[p] = class;
            }
        }
        (classes, y)
    }

    /// Keeps the reviews at `positions`, which must be sorted and in range.
    fn subset(&self, positions: &[usize]) -> Corpus {
        Self::from_valid(positions.iter().map(|&p| self.reviews[p].clone()).collect())
    }

    /// Returns a corpus whose reviews are transformed by `f`; reviews for
    /// which `f` returns `None` are dropped.
    pub fn filter_map<F>(&self, f: F) -> Corpus
    where
        F: FnMut(&Review) -> Option<Review>,
    {
        Self::from_valid(
            self.reviews
                .iter()
                .filter_map(f)
                .filter(|r| !r.text.is_empty() && !r.author_id.is_empty())
                .collect(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut file).map_err(|e| match e {
            Error::Json(j) if j.is_io() => Error::io(path, j.into()),
            other => other,
        })
    }

    pub fn load(path: &Path) -> Result<Corpus> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(
            writer,
            &CorpusFileRef {
                format: CORPUS_FORMAT,
                version: CORPUS_VERSION,
                reviews: &self.reviews,
            },
        )?;
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Corpus> {
        let file: CorpusFile = serde_json::from_reader(reader)?;
        if file.format != CORPUS_FORMAT {
            return Err(Error::CorpusFormat(format!(
                "unexpected format tag {:?}",
                file.format
            )));
        }
        if file.version != CORPUS_VERSION {
            return Err(Error::CorpusFormat(format!(
                "unsupported version {}",
                file.version
            )));
        }
        Corpus::new(file.reviews)
    }

    /// Hex SHA-256 of the serialized corpus.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("serializing to memory cannot fail");
        Sha256::digest(&buf)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Serialize)]
struct CorpusFileRef<'a> {
    format: &'a str,
    version: u32,
    reviews: &'a [Review],
}

#[derive(Deserialize)]
struct CorpusFile {
    format: String,
    version: u32,
    reviews: Vec<Review>,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Keep only reviews whose date starts with this prefix (e.g. `"2019"`).
    pub date_prefix: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub accepted: usize,
    /// Malformed records: empty author or text, bad rating or date.
    pub skipped: usize,
    /// Well-formed records rejected by the date filter.
    pub filtered_out: usize,
}

/// Reads a review TSV file. See [`parse_tsv_reader`] for the record layout.
pub fn parse_tsv(path: &Path, options: &ParseOptions) -> Result<(Corpus, ParseReport)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tsv_reader(BufReader::new(file), options).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses `author_id \t text [\t rating [\t date [\t review_id]]]` records.
///
/// `\t`, `\n`, `\r` and `\\` escapes in the text are decoded. When the fifth
/// column is absent the review id is the 1-based line number. Blank lines
/// are ignored; malformed records are counted in [`ParseReport::skipped`].
pub fn parse_tsv_reader<R: BufRead>(
    reader: R,
    options: &ParseOptions,
) -> Result<(Corpus, ParseReport)> {
    let mut report = ParseReport::default();
    let mut reviews = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<tsv>", e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let review = match parse_record(line, lineno + 1) {
            Some(r) => r,
            None => {
                report.skipped += 1;
                continue;
            }
        };
        if let Some(prefix) = &options.date_prefix {
            if !review.date.as_deref().is_some_and(|d| d.starts_with(prefix.as_str())) {
                report.filtered_out += 1;
                continue;
            }
        }
        reviews.push(review);
    }
    if report.skipped > 0 {
        log::warn!("skipped {} malformed records", report.skipped);
    }
    report.accepted = reviews.len();
    Ok((Corpus::from_valid(reviews), report))
}

fn parse_record(line: &str, lineno: usize) -> Option<Review> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 2 {
        return None;
    }
    let author_id = fields[0].trim();
    let text = unescape(fields[1]);
    if author_id.is_empty() || text.trim().is_empty() {
        return None;
    }
    let rating = match fields.get(2).map(|s| s.trim()) {
        None | Some("") => None,
        Some(s) => match s.parse::<u8>() {
            Ok(v) if (1..=5).contains(&v) => Some(v),
            _ => return None,
        },
    };
    let date = match fields.get(3).map(|s| s.trim()) {
        None | Some("") => None,
        Some(s) if is_iso_date(s) => Some(s.to_string()),
        Some(_) => return None,
    };
    let review_id = match fields.get(4).map(|s| s.trim()) {
        Some(id) if !id.is_empty() => id.to_string(),
        _ => lineno.to_string(),
    };
    Some(Review {
        review_id,
        author_id: author_id.to_string(),
        text,
        rating,
        date,
    })
}

/// Accepts `YYYY-MM-DD`, optionally followed by a time part.
fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() < 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    if b.len() > 10 && b[10] != b'T' && b[10] != b' ' {
        return false;
    }
    let num = |r: std::ops::Range<usize>| -> Option<u32> {
        let part = &s[r];
        part.bytes()
            .all(|c| c.is_ascii_digit())
            .then(|| part.parse().ok())
            .flatten()
    };
    matches!(
        (num(0..4), num(5..7), num(8..10)),
        (Some(_), Some(1..=12), Some(1..=31))
    )
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Inverse of the TSV text unescaping.
pub fn escape_tsv_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Writes the corpus in the ingestion TSV layout (five columns).
pub fn write_tsv<W: Write>(corpus: &Corpus, mut writer: W) -> std::io::Result<()> {
    for r in corpus.reviews() {
        writeln!(
            writer,
            "{}\t{}\t{}\t{}\t{}",
            r.author_id,
            escape_tsv_text(&r.text),
            r.rating.map(|v| v.to_string()).unwrap_or_default(),
            r.date.as_deref().unwrap_or(""),
            r.review_id
        )?;
    }
    Ok(())
}

/// Author ids ranked by review count (descending), ties by author id.
pub fn rank_authors(corpus: &Corpus) -> Vec<(&str, usize)> {
    let mut ranked: Vec<(&str, usize)> = corpus
        .author_index
        .iter()
        .map(|(a, p)| (a.as_str(), p.len()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
}

/// Keeps the `u` authors with the most reviews.
pub fn select_top_authors(corpus: &Corpus, u: usize) -> Result<Corpus> {
    if corpus.num_authors() < u {
        return Err(Error::NotEnoughAuthors {
            requested: u,
            available: corpus.num_authors(),
        });
    }
    let ranked = rank_authors(corpus);
    let mut keep: Vec<usize> = ranked[..u]
        .iter()
        .flat_map(|(a, _)| corpus.author_index[*a].iter().copied())
        .collect();
    keep.sort_unstable();
    Ok(corpus.subset(&keep))
}

fn subsample(corpus: &Corpus, seed: u64, target: impl Fn(&str, usize) -> Result<usize>) -> Result<Corpus> {
    let mut keep = Vec::with_capacity(corpus.len());
    for (author, positions) in &corpus.author_index {
        let n = target(author, positions.len())?;
        if n >= positions.len() {
            keep.extend_from_slice(positions);
            continue;
        }
        let mut rng = rng::stream(seed, "per-author-sample", author.as_bytes());
        let mut picked: Vec<usize> = index::sample(&mut rng, positions.len(), n)
            .into_iter()
            .map(|i| positions[i])
            .collect();
        picked.sort_unstable();
        keep.extend(picked);
    }
    keep.sort_unstable();
    Ok(corpus.subset(&keep))
}

/// Draws exactly `k` reviews per author without replacement.
///
/// With `allow_fewer`, authors with fewer than `k` reviews keep all of them.
pub fn sample_per_author(corpus: &Corpus, k: usize, seed: u64, allow_fewer: bool) -> Result<Corpus> {
    subsample(corpus, seed, |author, available| {
        if available < k && !allow_fewer {
            return Err(Error::NotEnoughReviews {
                author: author.to_string(),
                requested: k,
                available,
            });
        }
        Ok(k.min(available))
    })
}

/// Caps every author at `k_max` reviews.
pub fn cap_per_author(corpus: &Corpus, k_max: usize, seed: u64) -> Result<Corpus> {
    if k_max == 0 {
        return Err(Error::InvalidConfig("K_max must be at least 1".into()));
    }
    subsample(corpus, seed, |_, available| Ok(k_max.min(available)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub num_authors: usize,
    pub total_reviews: usize,
    pub posts_per_author_min: usize,
    pub posts_per_author_median: f64,
    pub posts_per_author_max: usize,
    pub posts_per_author_mean: f64,
    /// Sample standard deviation (n - 1 divisor); 0 for a single author.
    pub posts_per_author_sd: f64,
    pub chars_per_review_median: f64,
    pub chars_per_review_mean: f64,
    pub chars_per_review_p95: f64,
}

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn compute_stats(corpus: &Corpus) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut posts: Vec<f64> = corpus.author_index.values().map(|p| p.len() as f64).collect();
    posts.sort_by(f64::total_cmp);
    let mut chars: Vec<f64> = corpus.reviews.iter().map(|r| r.char_len() as f64).collect();
    chars.sort_by(f64::total_cmp);

    let u = posts.len() as f64;
    let posts_mean = posts.iter().sum::<f64>() / u;
    let posts_sd = if posts.len() > 1 {
        (posts.iter().map(|p| (p - posts_mean).powi(2)).sum::<f64>() / (u - 1.0)).sqrt()
    } else {
        0.0
    };

    Ok(CorpusStats {
        num_authors: posts.len(),
        total_reviews: corpus.len(),
        posts_per_author_min: posts[0] as usize,
        posts_per_author_median: quantile(&posts, 0.5),
        posts_per_author_max: posts[posts.len() - 1] as usize,
        posts_per_author_mean: posts_mean,
        posts_per_author_sd: posts_sd,
        chars_per_review_median: quantile(&chars, 0.5),
        chars_per_review_mean: chars.iter().sum::<f64>() / chars.len() as f64,
        chars_per_review_p95: quantile(&chars, 0.95),
    })
}
