//! Downstream evaluation: prerequisite-pair classification and
//! next-lecture recommendation over frozen entity embeddings, plus the
//! metrics they report.

mod metrics;
mod prereq;
mod rec;

pub use metrics::{
    hr_at_k, macro_prf, mrr, ndcg_at_k, precision_recall_f1, spearman_rank, BinaryConfusion,
};
pub use prereq::{eval_prereq, PrereqReport};
pub use rec::{eval_rec, RecReport};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exchange::ExchangeError;
use crate::numerics::NumericError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Numeric(#[from] NumericError),

    #[error(transparent)]
    Exchange(#[from] ExchangeError),

    #[error("split proportions {0:?} do not sum to 1")]
    BadProportions([f64; 3]),

    #[error("{n} items cannot populate train/valid/test at {proportions:?}")]
    SplitTooSmall { n: usize, proportions: [f64; 3] },

    #[error("class `{0}` is empty in the {1} split")]
    EmptyClass(bool, &'static str),

    #[error("interaction log for `{user}` has {len} events; need at least 2")]
    LogTooShort { user: String, len: usize },

    #[error("cutoff k must be at least 1")]
    BadCutoff,

    #[error("empty rank list")]
    EmptyRanks,

    #[error("rank {0} is not 1-based")]
    BadRank(usize),

    #[error("invalid eval config: {0}")]
    BadConfig(String),
}

/// Evaluation settings shared by both downstream tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Train/valid/test proportions.
    pub proportions: [f64; 3],
    pub seed: u64,
    /// Hidden width of the pair classifier.
    pub hidden: usize,
    /// Full-batch training epochs for the pair classifier.
    pub epochs: usize,
    pub lr: f64,
    /// Context length for recommendation scoring.
    pub window: usize,
    /// Ranking cutoff for HR and nDCG.
    pub k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            proportions: [0.8, 0.1, 0.1],
            seed: 42,
            hidden: 32,
            epochs: 300,
            lr: 0.01,
            window: 5,
            k: 10,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.hidden == 0 || self.window == 0 {
            return Err(EvalError::BadConfig("hidden and window must be positive".into()));
        }
        if self.k == 0 {
            return Err(EvalError::BadCutoff);
        }
        Ok(())
    }
}

/// Disjoint index lists covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n`, then a contiguous cut sized by
/// floor-then-distribute: each part gets `floor(p*n)` and the remainder
/// goes to the earliest parts.
pub fn make_split(n: usize, proportions: [f64; 3], seed: u64) -> Result<Split, EvalError> {
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || proportions.iter().any(|&p| p < 0.0) {
        return Err(EvalError::BadProportions(proportions));
    }
    let mut sizes: Vec<usize> = proportions.iter().map(|p| (p * n as f64) as usize).collect();
    let mut rem = n - sizes.iter().sum::<usize>();
    for s in sizes.iter_mut() {
        if rem == 0 {
            break;
        }
        *s += 1;
        rem -= 1;
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(EvalError::SplitTooSmall { n, proportions });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let test = order.split_off(sizes[0] + sizes[1]);
    let valid = order.split_off(sizes[0]);
    Ok(Split {
        train: order,
        valid,
        test,
    })
}

/// One `task  metric  value  seed  config_hash` TSV block.
pub fn report_lines(task: &str, metrics: &[(&str, f64)], seed: u64, config_hash: &str) -> String {
    let mut out = String::new();
    for (metric, value) in metrics {
        out.push_str(&format!("{task}\t{metric}\t{value}\t{seed}\t{config_hash}\n"));
    }
    out
}
