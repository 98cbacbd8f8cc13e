//! Next-lecture recommendation by cosine between a mean context vector
//! and every candidate lecture embedding.

use crate::corpus::InteractionLog;
use crate::exchange::EmbeddingSet;
use crate::numerics::cosine_value;
use crate::scalar::Scalar;
use crate::trainer::derive_seed;

use super::metrics::{hr_at_k, mrr, ndcg_at_k};
use super::{make_split, EvalConfig, EvalError};

/// Ranking metrics over held-out next-lecture events.
#[derive(Debug, Clone, PartialEq)]
pub struct RecReport {
    pub hr: f64,
    pub ndcg: f64,
    pub mrr: f64,
    pub events: usize,
}

/// Score every candidate for each next-lecture event of the test-split
/// logs. The context is the mean embedding of the last `window` watched
/// lectures; the candidate pool is the full lecture list, no exclusions.
pub fn eval_rec<S: Scalar>(
    embeddings: &EmbeddingSet<S>,
    logs: &[InteractionLog],
    candidates: &[String],
    cfg: &EvalConfig,
) -> Result<RecReport, EvalError> {
    cfg.validate()?;
    for log in logs {
        if log.lecture_ids.len() < 2 {
            return Err(EvalError::LogTooShort {
                user: log.user_id.clone(),
                len: log.lecture_ids.len(),
            });
        }
    }
    let dim = embeddings.dim();
    let cand_vecs: Vec<&[S]> = candidates
        .iter()
        .map(|id| embeddings.require(id))
        .collect::<Result<_, _>>()?;
    let cand_index = |id: &str| candidates.iter().position(|c| c == id);

    let split = make_split(logs.len(), cfg.proportions, derive_seed(cfg.seed, "rec-split"))?;
    let mut ranks = Vec::new();
    for &li in &split.test {
        let log = &logs[li];
        let vecs: Vec<&[S]> = log
            .lecture_ids
            .iter()
            .map(|id| embeddings.require(id))
            .collect::<Result<_, _>>()?;
        for t in 1..log.lecture_ids.len() {
            let start = t.saturating_sub(cfg.window);
            let mut context = vec![S::zero(); dim];
            for v in &vecs[start..t] {
                for (c, &x) in context.iter_mut().zip(*v) {
                    *c += x;
                }
            }
            let count = S::from_double((t - start) as f64);
            for c in context.iter_mut() {
                *c = *c / count;
            }
            let true_idx = cand_index(&log.lecture_ids[t]).ok_or_else(|| {
                EvalError::Exchange(crate::exchange::ExchangeError::MissingVector {
                    id: log.lecture_ids[t].clone(),
                })
            })?;
            ranks.push(rank_of(&context, &cand_vecs, true_idx)?);
        }
    }
    Ok(RecReport {
        hr: hr_at_k(&ranks, cfg.k)?,
        ndcg: ndcg_at_k(&ranks, cfg.k)?,
        mrr: mrr(&ranks)?,
        events: ranks.len(),
    })
}

/// Competition rank of the true candidate, ties broken by candidate index
/// so equal scores never depend on float ordering quirks.
fn rank_of<S: Scalar>(
    context: &[S],
    candidates: &[&[S]],
    true_idx: usize,
) -> Result<usize, EvalError> {
    let true_score = cosine_value(context, candidates[true_idx])?;
    let mut rank = 1usize;
    for (j, cand) in candidates.iter().enumerate() {
        if j == true_idx {
            continue;
        }
        let s = cosine_value(context, cand)?;
        if s > true_score || (s == true_score && j < true_idx) {
            rank += 1;
        }
    }
    Ok(rank)
}
