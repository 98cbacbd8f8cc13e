//! Ranking and classification metrics.

use super::EvalError;

/// Binary confusion counts with the "positive" class fixed by the caller.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BinaryConfusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl BinaryConfusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Self::default();
        for (actual, predicted) in pairs {
            match (actual, predicted) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// Confusion with the class labels flipped.
    pub fn inverted(self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

/// Positive-class precision, recall, F1; empty denominators count as 0.
pub fn precision_recall_f1(c: BinaryConfusion) -> (f64, f64, f64) {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let p = ratio(c.tp, c.tp + c.fp);
    let r = ratio(c.tp, c.tp + c.fn_);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Macro average over the two classes of a binary confusion.
pub fn macro_prf(c: BinaryConfusion) -> (f64, f64, f64) {
    let (p1, r1, f1) = precision_recall_f1(c);
    let (p0, r0, f0) = precision_recall_f1(c.inverted());
    ((p1 + p0) / 2.0, (r1 + r0) / 2.0, (f1 + f0) / 2.0)
}

fn check_ranks(ranks: &[usize]) -> Result<(), EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyRanks);
    }
    if let Some(&bad) = ranks.iter().find(|&&r| r == 0) {
        return Err(EvalError::BadRank(bad));
    }
    Ok(())
}

/// Fraction of events whose true item ranked within the top `k`.
pub fn hr_at_k(ranks: &[usize], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::BadCutoff);
    }
    check_ranks(ranks)?;
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    Ok(hits as f64 / ranks.len() as f64)
}

/// Single-relevant-item nDCG: `1/log2(rank+1)` inside the cutoff, else 0,
/// averaged over events.
pub fn ndcg_at_k(ranks: &[usize], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::BadCutoff);
    }
    check_ranks(ranks)?;
    let total: f64 = ranks
        .iter()
        .map(|&r| {
            if r <= k {
                1.0 / ((r as f64) + 1.0).log2()
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / ranks.len() as f64)
}

/// Mean reciprocal rank, no cutoff.
pub fn mrr(ranks: &[usize]) -> Result<f64, EvalError> {
    check_ranks(ranks)?;
    let total: f64 = ranks.iter().map(|&r| 1.0 / r as f64).sum();
    Ok(total / ranks.len() as f64)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rank(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}
