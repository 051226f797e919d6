use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Fold assignment for every sample position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Shuffles each class with a seeded stream and deals its members to the
/// folds round-robin. The deal continues across classes (class order is
/// ascending label), so fold sizes stay balanced overall as well.
pub fn stratified_kfold(labels: &[usize], n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::InvalidConfig("need at least 2 folds".into()));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    for (class, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < n_folds {
            return Err(Error::ClassTooSmall {
                class,
                required: n_folds,
                available: m.len(),
            });
        }
    }

    let mut assignments = vec![0; labels.len()];
    let mut next = 0;
    for (class, mut m) in members.into_iter().enumerate() {
        let mut rng = rng::indexed_stream(seed, "stratified-kfold", class as u64);
        m.shuffle(&mut rng);
        for i in m {
            assignments[i] = next;
            next = (next + 1) % n_folds;
        }
    }
    Ok(FoldPlan {
        n_folds,
        seed,
        assignments,
    })
}
