//! Prerequisite-pair classification over frozen embeddings.
//!
//! Direction-sensitive: a pair (a, b) is featurized as
//! `[e_a ; e_b ; e_a - e_b ; e_a .* e_b]` and fed to a small two-layer
//! ReLU classifier trained with a hinge loss. When the label list carries
//! no negatives, they are constructed as sampled reversals plus random
//! non-pairs at a 1:1 ratio to the positives.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::PrereqLabel;
use crate::exchange::EmbeddingSet;
use crate::numerics::{AdamState, Tape, Tensor};
use crate::scalar::Scalar;
use crate::trainer::derive_seed;

use super::metrics::{macro_prf, BinaryConfusion};
use super::{make_split, EvalConfig, EvalError};

/// Macro-averaged test metrics of the pair classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PrereqReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub test_size: usize,
}

pub fn eval_prereq<S: Scalar>(
    embeddings: &EmbeddingSet<S>,
    labels: &[PrereqLabel],
    cfg: &EvalConfig,
) -> Result<PrereqReport, EvalError> {
    cfg.validate()?;
    let dataset = with_negatives(labels, embeddings, cfg.seed);
    let n = dataset.len();
    let split = make_split(n, cfg.proportions, derive_seed(cfg.seed, "prereq-split"))?;

    let d = embeddings.dim();
    let mut features = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for pair in &dataset {
        let ea = embeddings.require(&pair.a)?;
        let eb = embeddings.require(&pair.b)?;
        features.push(pair_features(ea, eb, d));
        targets.push(pair.label);
    }
    for (part, name) in [(&split.train, "train"), (&split.test, "test")] {
        for class in [true, false] {
            if !part.iter().any(|&i| targets[i] == class) {
                return Err(EvalError::EmptyClass(class, name));
            }
        }
    }

    let predictions = train_and_predict(cfg, d, &features, &targets, &split.train, &split.test)?;
    let confusion = BinaryConfusion::from_pairs(
        split
            .test
            .iter()
            .zip(&predictions)
            .map(|(&i, &pred)| (targets[i], pred)),
    );
    let (precision, recall, f1) = macro_prf(confusion);
    Ok(PrereqReport {
        precision,
        recall,
        f1,
        test_size: split.test.len(),
    })
}

fn pair_features<S: Scalar>(ea: &[S], eb: &[S], d: usize) -> Vec<S> {
    let mut f = Vec::with_capacity(4 * d);
    f.extend_from_slice(ea);
    f.extend_from_slice(eb);
    f.extend(ea.iter().zip(eb).map(|(&x, &y)| x - y));
    f.extend(ea.iter().zip(eb).map(|(&x, &y)| x * y));
    f
}

/// Pass explicit negatives through; otherwise build them 1:1 against the
/// positives, half reversals and half random non-pairs, seeded.
fn with_negatives<S: Scalar>(
    labels: &[PrereqLabel],
    embeddings: &EmbeddingSet<S>,
    seed: u64,
) -> Vec<PrereqLabel> {
    let mut dataset: Vec<PrereqLabel> = labels.to_vec();
    if labels.iter().any(|l| !l.label) || labels.is_empty() {
        return dataset;
    }
    let positives: HashSet<(String, String)> = labels
        .iter()
        .map(|l| (l.a.clone(), l.b.clone()))
        .collect();
    let concepts: Vec<&str> = {
        let labelled: HashSet<&str> = labels
            .iter()
            .flat_map(|l| [l.a.as_str(), l.b.as_str()])
            .collect();
        let mut v: Vec<&str> = embeddings
            .ids()
            .iter()
            .map(String::as_str)
            .filter(|id| labelled.contains(id))
            .collect();
        v.sort_unstable();
        v
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "prereq-neg"));
    let mut seen: HashSet<(String, String)> = positives.clone();
    let target = labels.len();
    let mut negatives = Vec::with_capacity(target);

    // Half reversals of randomly chosen positives.
    let mut attempts = 0;
    while negatives.len() < target / 2 && attempts < target * 20 {
        attempts += 1;
        let l = &labels[rng.gen_range(0..labels.len())];
        let rev = (l.b.clone(), l.a.clone());
        if !seen.contains(&rev) {
            seen.insert(rev.clone());
            negatives.push(PrereqLabel {
                a: rev.0,
                b: rev.1,
                label: false,
            });
        }
    }
    // Fill with random non-pairs.
    attempts = 0;
    while negatives.len() < target && attempts < target * 100 {
        attempts += 1;
        let a = concepts[rng.gen_range(0..concepts.len())];
        let b = concepts[rng.gen_range(0..concepts.len())];
        if a == b {
            continue;
        }
        let key = (a.to_string(), b.to_string());
        if !seen.contains(&key) {
            seen.insert(key);
            negatives.push(PrereqLabel {
                a: a.into(),
                b: b.into(),
                label: false,
            });
        }
    }
    dataset.extend(negatives);
    dataset
}

/// Two-layer ReLU classifier trained full-batch with a hinge loss; returns
/// test predictions.
fn train_and_predict<S: Scalar>(
    cfg: &EvalConfig,
    d: usize,
    features: &[Vec<S>],
    targets: &[bool],
    train: &[usize],
    test: &[usize],
) -> Result<Vec<bool>, EvalError> {
    let in_dim = 4 * d;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "prereq-mlp"));
    let mut uniform = |rows: usize, cols: usize| -> Tensor<S> {
        let bound = 1.0 / (rows as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| S::from_double(rng.gen_range(-bound..bound)))
            .collect();
        Tensor::matrix(rows, cols, data).expect("sized").with_grad()
    };
    let mut w1 = uniform(in_dim, cfg.hidden);
    let mut b1 = Tensor::vector(vec![S::zero(); cfg.hidden]).with_grad();
    let mut w2 = uniform(cfg.hidden, 1);
    let mut b2 = Tensor::vector(vec![S::zero()]).with_grad();

    let stack = |idx: &[usize]| -> Tensor<S> {
        let data: Vec<S> = idx.iter().flat_map(|&i| features[i].iter().copied()).collect();
        Tensor::matrix(idx.len(), in_dim, data).expect("sized")
    };
    let train_x = stack(train);
    let train_y: Vec<S> = train
        .iter()
        .map(|&i| if targets[i] { S::one() } else { -S::one() })
        .collect();
    let y_tensor = Tensor::matrix(train.len(), 1, train_y).expect("sized");

    let shapes: Vec<Vec<usize>> = [&w1, &b1, &w2, &b2]
        .iter()
        .map(|t| t.shape().to_vec())
        .collect();
    let mut adam = AdamState::new(S::from_double(cfg.lr), &shapes);

    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let x = tape.constant(train_x.clone())?;
        let rw1 = tape.leaf(w1.clone())?;
        let rb1 = tape.leaf(b1.clone())?;
        let rw2 = tape.leaf(w2.clone())?;
        let rb2 = tape.leaf(b2.clone())?;
        let y = tape.constant(y_tensor.clone())?;

        let h_pre = tape.matmul(x, rw1)?;
        let h_b = tape.add_bias(h_pre, rb1)?;
        let h = tape.relu(h_b)?;
        let logit_pre = tape.matmul(h, rw2)?;
        let logits = tape.add_bias(logit_pre, rb2)?;
        // Hinge: mean(relu(1 - y .* logit)).
        let agreement = tape.mul(logits, y)?;
        let flipped = tape.scale(agreement, -S::one())?;
        let shifted = tape.add_scalar(flipped, S::one())?;
        let hinge = tape.relu(shifted)?;
        let loss = tape.mean(hinge)?;

        let grads = tape.backward(loss)?;
        let grad_of = |r| grads.wrt(r).expect("grad leaf").clone();
        let gs = [grad_of(rw1), grad_of(rb1), grad_of(rw2), grad_of(rb2)];
        adam.step(
            &mut [&mut w1, &mut b1, &mut w2, &mut b2],
            &[&gs[0], &gs[1], &gs[2], &gs[3]],
        )?;
    }

    // Inference without the tape.
    let predict = |idx: &[usize]| -> Vec<bool> {
        idx.iter()
            .map(|&i| {
                let f = &features[i];
                let mut logit = b2.data()[0];
                for hcol in 0..cfg.hidden {
                    let mut pre = b1.data()[hcol];
                    for (r, &x) in f.iter().enumerate() {
                        pre += x * w1.get2(r, hcol);
                    }
                    if pre > S::zero() {
                        logit += pre * w2.get2(hcol, 0);
                    }
                }
                logit > S::zero()
            })
            .collect()
    };
    Ok(predict(test))
}
