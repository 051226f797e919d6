//! Exact cosine nearest-neighbour identification over unit-norm embeddings.

use crate::error::{Error, Result};

/// Labelled reference embeddings, stored row-major.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    dim: usize,
    data: Vec<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

/// Candidate authors, best first, with each author's minimum cosine
/// distance to the query.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnRanking {
    pub authors: Vec<usize>,
    pub distances: Vec<f64>,
}

impl KnnIndex {
    pub fn new(embeddings: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::InvalidInput("kNN reference set is empty".into()));
        }
        if embeddings.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: embeddings.len(),
                actual: labels.len(),
            });
        }
        let dim = embeddings[0].len();
        let mut data = Vec::with_capacity(dim * embeddings.len());
        for e in embeddings {
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: e.len(),
                });
            }
            data.extend_from_slice(e);
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidInput(format!("label {bad} out of range")));
        }
        Ok(KnnIndex {
            dim,
            data,
            labels: labels.to_vec(),
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Cosine distance `1 - <q, e_i>` to every reference point.
    pub fn distances(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        Ok(self
            .data
            .chunks_exact(self.dim)
            .map(|row| 1.0 - row.iter().zip(query).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    /// Ranks authors for `query`.
    ///
    /// The first entry is the majority label among the `knn_k` nearest
    /// neighbours (ties: smaller mean distance of that label's voters, then
    /// lower label). The remaining authors follow by their minimum distance
    /// among the `neighbor_pool` nearest neighbours, and authors absent from
    /// the pool come last by their minimum distance over the whole index.
    /// Equal distances resolve by reference position, then by label.
    pub fn rank(&self, query: &[f64], knn_k: usize, neighbor_pool: usize) -> Result<KnnRanking> {
        if knn_k == 0 || neighbor_pool < knn_k {
            return Err(Error::InvalidInput(format!(
                "neighbor pool {neighbor_pool} must be at least knn_k {knn_k} >= 1"
            )));
        }
        let dist = self.distances(query)?;
        let mut order: Vec<usize> = (0..dist.len()).collect();
        let pool = neighbor_pool.min(order.len());
        let by_distance = |a: &usize, b: &usize| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b));
        if pool < order.len() {
            order.select_nth_unstable_by(pool - 1, by_distance);
            order[..pool].sort_unstable_by(by_distance);
        } else {
            order.sort_unstable_by(by_distance);
        }

        // vote
        let voters = knn_k.min(order.len());
        let mut votes = vec![0usize; self.n_classes];
        let mut vote_dist = vec![0.0; self.n_classes];
        for &i in &order[..voters] {
            votes[self.labels[i]] += 1;
            vote_dist[self.labels[i]] += dist[i];
        }
        let winner = (0..self.n_classes)
            .filter(|&c| votes[c] > 0)
            .min_by(|&a, &b| {
                votes[b]
                    .cmp(&votes[a])
                    .then((vote_dist[a] / votes[a] as f64).total_cmp(&(vote_dist[b] / votes[b] as f64)))
                    .then(a.cmp(&b))
            })
            .expect("at least one voter");

        // per-author minimum distance: pool first, then the rest of the index
        let mut best = vec![f64::INFINITY; self.n_classes];
        let mut in_pool = vec![false; self.n_classes];
        for &i in &order[..pool] {
            let l = self.labels[i];
            in_pool[l] = true;
            best[l] = best[l].min(dist[i]);
        }
        for (i, &l) in self.labels.iter().enumerate() {
            if !in_pool[l] {
                best[l] = best[l].min(dist[i]);
            }
        }
        let mut rest: Vec<usize> = (0..self.n_classes).filter(|&c| c != winner).collect();
        rest.sort_by(|&a, &b| {
            in_pool[b]
                .cmp(&in_pool[a])
                .then(best[a].total_cmp(&best[b]))
                .then(a.cmp(&b))
        });
        let mut authors = Vec::with_capacity(self.n_classes);
        authors.push(winner);
        authors.extend(rest);
        let distances = authors.iter().map(|&a| best[a]).collect();
        Ok(KnnRanking { authors, distances })
    }
}

/// Convenience wrapper: build an index and rank one query.
pub fn knn_rank(
    train: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    query: &[f64],
    knn_k: usize,
    neighbor_pool: usize,
) -> Result<KnnRanking> {
    KnnIndex::new(train, labels, n_classes)?.rank(query, knn_k, neighbor_pool)
}
