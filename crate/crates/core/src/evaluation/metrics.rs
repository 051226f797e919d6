use crate::error::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    check_lengths(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Ok(0.0);
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// Unweighted mean of per-class F1 over the classes present in `y_true`.
///
/// Predictions of classes absent from `y_true` still count as false
/// positives for nothing and false negatives for the true class.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    check_lengths(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Ok(0.0);
    }
    let k = y_true.iter().chain(y_pred).max().map_or(0, |&m| m + 1);
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fn_ = vec![0usize; k];
    let mut present = vec![false; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        present[t] = true;
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut sum = 0.0;
    let mut classes = 0;
    for c in (0..k).filter(|&c| present[c]) {
        classes += 1;
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom > 0 {
            sum += 2.0 * tp[c] as f64 / denom as f64;
        }
    }
    Ok(sum / classes as f64)
}

/// Fraction of samples whose true class is among the first `k` entries of
/// its ranking.
pub fn top_k_accuracy<R: AsRef<[usize]>>(y_true: &[usize], rankings: &[R], k: usize) -> Result<f64> {
    check_lengths(y_true.len(), rankings.len())?;
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut hits = 0;
    for (i, (t, r)) in y_true.iter().zip(rankings).enumerate() {
        let r = r.as_ref();
        if r.len() < k {
            return Err(Error::InvalidInput(format!(
                "ranking {i} has {} entries, k = {k}",
                r.len()
            )));
        }
        if r[..k].contains(t) {
            hits += 1;
        }
    }
    Ok(if y_true.is_empty() {
        0.0
    } else {
        hits as f64 / y_true.len() as f64
    })
}
