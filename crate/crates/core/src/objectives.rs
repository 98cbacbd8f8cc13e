//! Training objectives: the margin-ranking graph loss over positive edges
//! and their corruptions, heuristic concept-complexity targets from
//! occurrence patterns, the complexity regression loss, and the weighted
//! combination of the two.

use std::collections::HashMap;

use thiserror::Error;

use crate::corpus::{Corpus, OccurrenceIndex};
use crate::numerics::{cosine_value, NumericError, Tape, Tensor, TensorRef};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error(transparent)]
    Numeric(#[from] NumericError),

    #[error("no embedding row for entity `{id}`")]
    MissingEmbedding { id: String },

    #[error("trade-off weight {0} outside [0, 1]")]
    BadTradeoff(f64),

    #[error("margin {0} must be nonnegative")]
    BadMargin(f64),
}

/// Loss hyperparameters: hinge margin and the graph/domain trade-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub margin: f64,
    pub lambda1: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(0.0..=1.0).contains(&self.lambda1) {
            return Err(ObjectiveError::BadTradeoff(self.lambda1));
        }
        if self.margin < 0.0 || !self.margin.is_finite() {
            return Err(ObjectiveError::BadMargin(self.margin));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            margin: 0.5,
            lambda1: 0.5,
        }
    }
}

/// Trainable rows for leaf entities (concepts and lectures); course
/// embeddings come from the encoder, not from stored rows.
#[derive(Debug, Clone)]
pub struct EmbeddingTable<S: Scalar> {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Tensor<S>,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn new(ids: Vec<String>, matrix: Tensor<S>) -> Result<Self, NumericError> {
        if matrix.shape().len() != 2 || matrix.rows() != ids.len() {
            return Err(NumericError::ShapeMismatch {
                op: "embedding_table",
                detail: format!("{} ids, matrix {:?}", ids.len(), matrix.shape()),
            });
        }
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(Self { ids, index, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row_index(&self, id: &str) -> Result<usize, ObjectiveError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| ObjectiveError::MissingEmbedding { id: id.to_string() })
    }

    pub fn row(&self, id: &str) -> Result<&[S], ObjectiveError> {
        Ok(self.matrix.row(self.row_index(id)?))
    }

    pub fn matrix(&self) -> &Tensor<S> {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Tensor<S> {
        &mut self.matrix
    }
}

/// Plain cosine similarity with the degenerate-vector guard.
pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> Result<S, NumericError> {
    cosine_value(a, b)
}

/// One positive presentation with its corrupted alternatives, all already
/// materialized on the tape (table rows or encoder outputs).
#[derive(Debug, Clone)]
pub struct TripletSample {
    pub src: TensorRef,
    pub dst: TensorRef,
    pub corrupt_dsts: Vec<TensorRef>,
}

/// Margin-ranking loss: every positive edge must out-score each of its
/// corruptions by the margin. Empty corruption sets contribute nothing.
pub fn triplet_loss<S: Scalar>(
    tape: &mut Tape<S>,
    samples: &[TripletSample],
    weights: &LossWeights,
) -> Result<TensorRef, ObjectiveError> {
    weights.validate()?;
    let margin = S::from_double(weights.margin);
    let mut total = tape.scalar(S::zero())?;
    for sample in samples {
        if sample.corrupt_dsts.is_empty() {
            continue;
        }
        let f_pos = tape.cosine(sample.src, sample.dst)?;
        for &neg in &sample.corrupt_dsts {
            let f_neg = tape.cosine(sample.src, neg)?;
            let gap = tape.sub(f_neg, f_pos)?;
            let shifted = tape.add_scalar(gap, margin)?;
            let hinge = tape.relu(shifted)?;
            total = tape.add(total, hinge)?;
        }
    }
    Ok(total)
}

/// Heuristic complexity of one concept, derived from where it occurs.
///
/// `alc` is the fraction of a course's lectures the concept tags, `ast`
/// the normalized span from first to last occurrence, both averaged over
/// the concept's courses; `d` is their mean. Higher values mean more
/// basic.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRecord {
    pub concept_id: String,
    pub alc: f64,
    pub ast: f64,
    pub d: f64,
}

/// Complexity targets for every concept that occurs in at least one
/// course; absent concepts get no record (and no loss term).
pub fn compute_complexity(idx: &OccurrenceIndex, corpus: &Corpus) -> Vec<ComplexityRecord> {
    let course_len: Vec<usize> = (0..corpus.courses.len())
        .map(|c| corpus.course_lecture_seq(c).len())
        .collect();
    let mut agg: Vec<(f64, f64, usize)> = vec![(0.0, 0.0, 0); corpus.concepts.len()];
    for (concept, course, positions) in idx.iter() {
        let z = course_len[course] as f64;
        let first = *positions.first().expect("non-empty occurrence") as f64;
        let last = *positions.last().expect("non-empty occurrence") as f64;
        let entry = &mut agg[concept];
        entry.0 += positions.len() as f64 / z;
        entry.1 += (last - first + 1.0) / z;
        entry.2 += 1;
    }
    agg.into_iter()
        .enumerate()
        .filter(|(_, (_, _, n))| *n > 0)
        .map(|(concept, (alc_sum, ast_sum, n))| {
            let alc = alc_sum / n as f64;
            let ast = ast_sum / n as f64;
            ComplexityRecord {
                concept_id: corpus.concepts[concept].id.clone(),
                alc,
                ast,
                d: (alc + ast) / 2.0,
            }
        })
        .collect()
}

/// Complexity records as a TSV table: `concept_id  alc  ast  d`.
pub fn complexity_tsv(records: &[ComplexityRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", r.concept_id, r.alc, r.ast, r.d));
    }
    out
}

/// Squared-error regression of complexity targets from embedding rows.
///
/// `rows` is `[n_records, d]` (gathered in record order), `head_w` is
/// `[d, 1]` and `head_b` is `[1]`. The sum is unnormalized unless
/// `mean_reduce` is set.
pub fn complexity_loss<S: Scalar>(
    tape: &mut Tape<S>,
    records: &[ComplexityRecord],
    rows: TensorRef,
    head_w: TensorRef,
    head_b: TensorRef,
    mean_reduce: bool,
) -> Result<TensorRef, ObjectiveError> {
    if records.is_empty() {
        return Ok(tape.scalar(S::zero())?);
    }
    if tape.value(rows).rows() != records.len() {
        return Err(ObjectiveError::Numeric(NumericError::ShapeMismatch {
            op: "complexity_loss",
            detail: format!(
                "{} rows for {} records",
                tape.value(rows).rows(),
                records.len()
            ),
        }));
    }
    let pred_raw = tape.matmul(rows, head_w)?;
    let pred = tape.add_bias(pred_raw, head_b)?;
    let targets: Vec<S> = records.iter().map(|r| S::from_double(r.d)).collect();
    let target = tape.constant(Tensor::matrix(records.len(), 1, targets)?)?;
    let resid = tape.sub(pred, target)?;
    let sq = tape.square(resid)?;
    let loss = if mean_reduce {
        tape.mean(sq)?
    } else {
        tape.sum(sq)?
    };
    Ok(loss)
}

/// `lambda1 * L_triplet + (1 - lambda1) * L_mse`.
pub fn combined_loss<S: Scalar>(
    tape: &mut Tape<S>,
    l_triplet: TensorRef,
    l_mse: TensorRef,
    lambda1: f64,
) -> Result<TensorRef, ObjectiveError> {
    if !(0.0..=1.0).contains(&lambda1) {
        return Err(ObjectiveError::BadTradeoff(lambda1));
    }
    let a = tape.scale(l_triplet, S::from_double(lambda1))?;
    let b = tape.scale(l_mse, S::from_double(1.0 - lambda1))?;
    Ok(tape.add(a, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{fixtures, occurrence_index};
    use approx::assert_relative_eq;

    #[test]
    fn cosine_fixture_values() {
        assert_relative_eq!(
            cosine(&[1.0, 1.0], &[1.0, 1.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cosine_rejects_near_zero_vectors() {
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(NumericError::DegenerateVector)
        ));
        assert!(cosine(&[1e-13, 0.0], &[1.0, 0.0]).is_err());
    }

    /// Unit vectors with an exact target cosine against [1, 0].
    fn unit_with_cos(c: f64) -> Vec<f64> {
        vec![c, (1.0 - c * c).sqrt()]
    }

    fn sample_on<'t>(
        tape: &mut Tape<f64>,
        pos_cos: f64,
        neg_cos: &[f64],
    ) -> TripletSample {
        let src = tape.constant(Tensor::vector(vec![1.0, 0.0])).unwrap();
        let dst = tape
            .constant(Tensor::vector(unit_with_cos(pos_cos)))
            .unwrap();
        let corrupt_dsts = neg_cos
            .iter()
            .map(|&c| tape.constant(Tensor::vector(unit_with_cos(c))).unwrap())
            .collect();
        let _ = &tape; // bindings built; sample owns only refs
        TripletSample {
            src,
            dst,
            corrupt_dsts,
        }
    }

    #[test]
    fn hinge_floors_at_zero_when_margin_is_met() {
        let mut tape = Tape::new();
        let s = sample_on(&mut tape, 0.9, &[0.2]);
        let weights = LossWeights {
            margin: 0.5,
            lambda1: 0.5,
        };
        let loss = triplet_loss(&mut tape, &[s], &weights).unwrap();
        assert_eq!(tape.item(loss).unwrap(), 0.0);
    }

    #[test]
    fn equal_scores_cost_exactly_the_margin() {
        let mut tape = Tape::new();
        let s = sample_on(&mut tape, 0.4, &[0.4]);
        let weights = LossWeights {
            margin: 0.5,
            lambda1: 0.5,
        };
        let loss = triplet_loss(&mut tape, &[s], &weights).unwrap();
        assert_relative_eq!(tape.item(loss).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn empty_corruptions_contribute_nothing() {
        let mut tape = Tape::new();
        let s = sample_on(&mut tape, 0.1, &[]);
        let loss = triplet_loss(&mut tape, &[s], &LossWeights::default()).unwrap();
        assert_eq!(tape.item(loss).unwrap(), 0.0);
    }

    #[test]
    fn triplet_loss_is_scale_invariant() {
        let embed = |scale: f64| {
            let mut tape = Tape::new();
            let src = tape
                .constant(Tensor::vector(vec![scale * 0.3, scale * -0.8]))
                .unwrap();
            let dst = tape
                .constant(Tensor::vector(vec![scale * 1.1, scale * 0.4]))
                .unwrap();
            let neg = tape
                .constant(Tensor::vector(vec![scale * -0.5, scale * 0.9]))
                .unwrap();
            let s = TripletSample {
                src,
                dst,
                corrupt_dsts: vec![neg],
            };
            let loss = triplet_loss(&mut tape, &[s], &LossWeights::default()).unwrap();
            tape.item(loss).unwrap()
        };
        assert_relative_eq!(embed(1.0), embed(7.5), epsilon = 1e-12);
    }

    #[test]
    fn complexity_fixture_course_of_five() {
        let corpus = fixtures::five_lecture();
        let idx = occurrence_index(&corpus);
        let records = compute_complexity(&idx, &corpus);
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.concept_id, "c1");
        assert_relative_eq!(r.alc, 0.4, epsilon = 1e-15);
        assert_relative_eq!(r.ast, 0.6, epsilon = 1e-15);
        assert_relative_eq!(r.d, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn single_occurrence_gives_one_over_len() {
        // In the tiny fixture c1 tags only lecture 0 of a 2-lecture course.
        let corpus = fixtures::tiny();
        let idx = occurrence_index(&corpus);
        let records = compute_complexity(&idx, &corpus);
        let r = records.iter().find(|r| r.concept_id == "c1").unwrap();
        assert_relative_eq!(r.alc, 0.5, epsilon = 1e-15);
        assert_relative_eq!(r.ast, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn full_coverage_concept_reaches_one() {
        let corpus = fixtures::tiny();
        let idx = occurrence_index(&corpus);
        let records = compute_complexity(&idx, &corpus);
        let r = records.iter().find(|r| r.concept_id == "c2").unwrap();
        assert_relative_eq!(r.alc, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.ast, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.d, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn span_always_dominates_coverage() {
        let corpus = fixtures::five_lecture();
        let idx = occurrence_index(&corpus);
        for r in compute_complexity(&idx, &corpus) {
            assert!(r.alc <= r.ast + 1e-15, "{r:?}");
        }
    }

    fn head_loss(records: &[ComplexityRecord], rows: Tensor<f64>, w: Vec<f64>, b: f64) -> f64 {
        let mut tape = Tape::new();
        let rows_ref = tape.constant(rows).unwrap();
        let d = w.len();
        let w_ref = tape.constant(Tensor::matrix(d, 1, w).unwrap()).unwrap();
        let b_ref = tape.constant(Tensor::vector(vec![b])).unwrap();
        let loss = complexity_loss(&mut tape, records, rows_ref, w_ref, b_ref, false).unwrap();
        tape.item(loss).unwrap()
    }

    #[test]
    fn zero_head_fits_zero_targets_exactly() {
        let records = vec![ComplexityRecord {
            concept_id: "c".into(),
            alc: 0.0,
            ast: 0.0,
            d: 0.0,
        }];
        let rows = Tensor::matrix(1, 2, vec![0.7, -0.3]).unwrap();
        assert_eq!(head_loss(&records, rows, vec![0.0, 0.0], 0.0), 0.0);
    }

    #[test]
    fn residual_squares() {
        // d = 0.5 with a head that predicts exactly 0.3.
        let records = vec![ComplexityRecord {
            concept_id: "c".into(),
            alc: 0.5,
            ast: 0.5,
            d: 0.5,
        }];
        let rows = Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap();
        let loss = head_loss(&records, rows, vec![0.0, 0.0], 0.3);
        assert_relative_eq!(loss, 0.04, epsilon = 1e-12);
    }

    #[test]
    fn no_records_no_loss() {
        let mut tape = Tape::new();
        let rows = tape.constant(Tensor::zeros(vec![0, 2])).unwrap();
        let w = tape.constant(Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap()).unwrap();
        let b = tape.constant(Tensor::vector(vec![0.0])).unwrap();
        let loss = complexity_loss(&mut tape, &[], rows, w, b, false).unwrap();
        assert_eq!(tape.item(loss).unwrap(), 0.0);
    }

    #[test]
    fn combination_endpoints_and_midpoint() {
        let eval = |lambda1: f64| {
            let mut tape = Tape::new();
            let lt = tape.scalar(2.0).unwrap();
            let lm = tape.scalar(4.0).unwrap();
            let c = combined_loss(&mut tape, lt, lm, lambda1).unwrap();
            tape.item(c).unwrap()
        };
        assert_eq!(eval(1.0), 2.0);
        assert_eq!(eval(0.0), 4.0);
        assert_relative_eq!(eval(0.5), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn out_of_range_tradeoff_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let lt = tape.scalar(1.0).unwrap();
        let lm = tape.scalar(1.0).unwrap();
        assert!(matches!(
            combined_loss(&mut tape, lt, lm, 1.5),
            Err(ObjectiveError::BadTradeoff(_))
        ));
        assert!(matches!(
            LossWeights {
                margin: -0.1,
                lambda1: 0.5
            }
            .validate(),
            Err(ObjectiveError::BadMargin(_))
        ));
    }
}
