//! End-to-end training: parameter initialization, the epoch loop over
//! shuffled edge presentations with fresh negative corruptions, Adam
//! updates of every trainable tensor, checkpointing, and embedding export.
//!
//! Determinism contract (64-bit mode): a fixed seed fixes the whole
//! trajectory bit-exactly, and resuming from a checkpoint at any epoch
//! boundary matches the uninterrupted run because every epoch draws its
//! randomness from a seed derived as `mix(seed, epoch)` rather than from a
//! long-lived RNG.

mod checkpoint;

pub use checkpoint::{checkpoint_load, checkpoint_peek_config, checkpoint_save};

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};
use crate::encoder::{encode_course, CourseInput, EncoderBinding, EncoderConfig};
use crate::exchange::{EmbeddingSet, ExchangeError};
use crate::graph::{GraphError, RelationGraph, VertexType};
use crate::numerics::{AdamState, Gradients, NumericError, Tape, Tensor, TensorRef};
use crate::objectives::{
    combined_loss, complexity_loss, compute_complexity, triplet_loss, ComplexityRecord,
    LossWeights, ObjectiveError, TripletSample,
};
use crate::scalar::Scalar;
use crate::textenc::{fnv1a, TextEncError, TextEncoder};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error(transparent)]
    Numeric(#[from] NumericError),

    #[error(transparent)]
    Objective(#[from] ObjectiveError),

    #[error(transparent)]
    TextEnc(#[from] TextEncError),

    #[error(transparent)]
    Exchange(#[from] ExchangeError),

    #[error("invalid config: {0}")]
    BadConfig(String),

    #[error(
        "negative sampling starved on {starved} of {total} presentations in epoch {epoch}; \
         the graph is too dense to corrupt"
    )]
    Starvation {
        epoch: usize,
        starved: usize,
        total: usize,
    },

    #[error("non-finite loss in epoch {epoch}, batch {batch}: {source}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        #[source]
        source: NumericError,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint config mismatch on `{field}`: checkpoint {have}, requested {want}")]
    ConfigMismatch {
        field: &'static str,
        have: String,
        want: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Precision {
    F32,
    F64,
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

/// All training hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    /// Model width.
    pub dim: usize,
    /// Transformer layers.
    pub layers: usize,
    /// Attention heads.
    pub heads: usize,
    /// Course capacity: lectures.
    pub max_lectures: usize,
    /// Course capacity: modules.
    pub max_modules: usize,
    /// Hinge margin.
    pub margin: f64,
    /// Graph/domain trade-off.
    pub lambda1: f64,
    /// Corruptions per positive presentation.
    pub negatives: usize,
    /// Shared-neighbor threshold for implicit edges.
    pub implicit_threshold: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Width of text-encoder vectors feeding the projection.
    pub text_dim: usize,
    /// Mean- instead of sum-reduce the complexity regression.
    pub mse_mean: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            layers: 2,
            heads: 4,
            max_lectures: 510,
            max_modules: 65,
            margin: 0.5,
            lambda1: 0.5,
            negatives: 5,
            implicit_threshold: 2,
            lr: 1e-3,
            epochs: 100,
            batch_size: 64,
            seed: 42,
            precision: Precision::F64,
            text_dim: 256,
            mse_mean: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::BadConfig(msg));
        if self.dim == 0 || self.layers == 0 || self.heads == 0 {
            return bad("dim, layers, and heads must be positive".into());
        }
        if self.dim % self.heads != 0 {
            return bad(format!("heads {} must divide dim {}", self.heads, self.dim));
        }
        if !(0.0..=1.0).contains(&self.lambda1) {
            return bad(format!("lambda1 {} outside [0, 1]", self.lambda1));
        }
        if self.margin < 0.0 {
            return bad(format!("margin {} must be nonnegative", self.margin));
        }
        if self.negatives == 0 || self.batch_size == 0 {
            return bad("negatives and batch_size must be positive".into());
        }
        if self.implicit_threshold == 0 {
            return bad("implicit_threshold must be at least 1".into());
        }
        if self.text_dim == 0 || self.max_lectures == 0 || self.max_modules == 0 {
            return bad("text_dim and course maxima must be positive".into());
        }
        Ok(())
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            dim: self.dim,
            layers: self.layers,
            heads: self.heads,
            max_lectures: self.max_lectures,
            max_modules: self.max_modules,
            text_dim: self.text_dim,
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            margin: self.margin,
            lambda1: self.lambda1,
        }
    }

    /// Fields that must agree between a checkpoint and a resume request
    /// (everything except the epoch budget).
    pub fn compatible_with(&self, other: &Self) -> Result<(), TrainError> {
        macro_rules! check {
            ($field:ident) => {
                if self.$field != other.$field {
                    return Err(TrainError::ConfigMismatch {
                        field: stringify!($field),
                        have: format!("{:?}", self.$field),
                        want: format!("{:?}", other.$field),
                    });
                }
            };
        }
        check!(dim);
        check!(layers);
        check!(heads);
        check!(max_lectures);
        check!(max_modules);
        check!(margin);
        check!(lambda1);
        check!(negatives);
        check!(implicit_threshold);
        check!(lr);
        check!(batch_size);
        check!(seed);
        check!(precision);
        check!(text_dim);
        check!(mse_mean);
        Ok(())
    }
}

/// Stable per-purpose seed derivation so checkpoint resume replays the
/// exact RNG stream of the uninterrupted run.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(label.as_bytes());
    fnv1a(&bytes, 0xcbf2_9ce4_8422_2325)
}

/// Where an entity's embedding comes from during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntitySource {
    /// Row of the trainable embedding table.
    TableRow(usize),
    /// Encoded on the fly from the course input with this corpus index.
    Course(usize),
}

/// Trainable state: every named tensor plus the entity registry that maps
/// ids onto table rows.
#[derive(Debug, Clone)]
pub struct Model<S: Scalar> {
    pub cfg: TrainConfig,
    pub params: BTreeMap<String, Tensor<S>>,
    pub concept_ids: Vec<String>,
    pub lecture_ids: Vec<String>,
    pub course_ids: Vec<String>,
}

impl<S: Scalar> Model<S> {
    /// Initialize all parameters: projection and encoder weights with
    /// symmetric uniform fan-in scaling, position tables and the summary
    /// token from N(0, 0.02^2), layer-norm gains at one, biases at zero,
    /// and table rows from projected text vectors.
    pub fn init(
        cfg: &TrainConfig,
        corpus: &Corpus,
        textenc: &TextEncoder<S>,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        corpus.check_limits(cfg.max_lectures, cfg.max_modules)?;
        if textenc.dim() != cfg.text_dim {
            return Err(TrainError::BadConfig(format!(
                "text encoder dim {} != configured text_dim {}",
                textenc.dim(),
                cfg.text_dim
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "init"));
        let normal = Normal::new(0.0f64, 0.02).expect("valid sigma");
        let enc = cfg.encoder();
        enc.validate()?;

        let mut params: BTreeMap<String, Tensor<S>> = BTreeMap::new();
        for (name, shape) in enc.param_shapes() {
            let n: usize = shape.iter().product();
            let data: Vec<S> = if name.ends_with("gain") {
                vec![S::one(); n]
            } else if name.ends_with("bias") || name.ends_with("_b1") || name.ends_with("_b2") {
                vec![S::zero(); n]
            } else if name == "enc.e_lp" || name == "enc.e_mp" || name == "enc.cls" {
                (0..n)
                    .map(|_| S::from_double(normal.sample(&mut rng)))
                    .collect()
            } else {
                let bound = 1.0 / (shape[0] as f64).sqrt();
                (0..n)
                    .map(|_| S::from_double(rng.gen_range(-bound..bound)))
                    .collect()
            };
            params.insert(name, Tensor::new(shape, data)?.with_grad());
        }

        let bound = 1.0 / (cfg.dim as f64).sqrt();
        let head_w: Vec<S> = (0..cfg.dim)
            .map(|_| S::from_double(rng.gen_range(-bound..bound)))
            .collect();
        params.insert(
            "head.w".into(),
            Tensor::matrix(cfg.dim, 1, head_w)?.with_grad(),
        );
        params.insert("head.b".into(), Tensor::vector(vec![S::zero()]).with_grad());

        // Table rows: text vectors pushed through the initial projection.
        let proj = params["enc.proj"].clone();
        let concept_ids: Vec<String> = corpus.concepts.iter().map(|c| c.id.clone()).collect();
        let lecture_ids: Vec<String> = corpus.lectures.iter().map(|l| l.id.clone()).collect();
        let mut rows = Vec::with_capacity((concept_ids.len() + lecture_ids.len()) * cfg.dim);
        let texts = corpus
            .concepts
            .iter()
            .map(|c| (c.id.clone(), c.text()))
            .chain(corpus.lectures.iter().map(|l| (l.id.clone(), l.text())));
        for (id, text) in texts {
            let tv = textenc.encode(&id, &text)?;
            for j in 0..cfg.dim {
                let mut acc = S::zero();
                for (i, &x) in tv.values.iter().enumerate() {
                    acc += x * proj.get2(i, j);
                }
                rows.push(acc);
            }
        }
        params.insert(
            "table.rows".into(),
            Tensor::matrix(concept_ids.len() + lecture_ids.len(), cfg.dim, rows)?.with_grad(),
        );

        Ok(Self {
            cfg: cfg.clone(),
            params,
            concept_ids,
            lecture_ids,
            course_ids: corpus.courses.iter().map(|c| c.id.clone()).collect(),
        })
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.keys().cloned().collect()
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.params.values().map(|t| t.shape().to_vec()).collect()
    }

    fn table_row_count(&self) -> usize {
        self.concept_ids.len() + self.lecture_ids.len()
    }

    /// Embedding source per graph vertex; panics if the graph was built
    /// over a different corpus.
    fn entity_sources(&self, graph: &RelationGraph) -> Vec<EntitySource> {
        let index =
            |ids: &[String]| -> HashMap<String, usize> {
                ids.iter()
                    .enumerate()
                    .map(|(i, id)| (id.clone(), i))
                    .collect()
            };
        let concepts = index(&self.concept_ids);
        let lectures = index(&self.lecture_ids);
        let courses = index(&self.course_ids);
        (0..graph.vertex_count())
            .map(|i| {
                let v = graph.vertex(i);
                match v.vtype {
                    VertexType::Concept => EntitySource::TableRow(
                        concepts[&v.id],
                    ),
                    VertexType::Lecture => {
                        EntitySource::TableRow(self.concept_ids.len() + lectures[&v.id])
                    }
                    VertexType::Course => EntitySource::Course(courses[&v.id]),
                }
            })
            .collect()
    }
}

/// Tape handles for every named parameter of a model.
pub struct Bindings {
    pub by_name: BTreeMap<String, TensorRef>,
    pub encoder: EncoderBinding,
    pub table: TensorRef,
    pub head_w: TensorRef,
    pub head_b: TensorRef,
}

impl Bindings {
    /// Put every parameter on the tape as a gradient-tracking leaf.
    pub fn bind<S: Scalar>(model: &Model<S>, tape: &mut Tape<S>) -> Result<Self, TrainError> {
        let mut by_name = BTreeMap::new();
        for (name, tensor) in &model.params {
            by_name.insert(name.clone(), tape.leaf(tensor.clone())?);
        }
        Self::from_refs(&model.cfg.encoder(), tape, by_name)
    }

    /// Assemble bindings from already-created tape handles (one per
    /// parameter name); used by the gradient checker.
    pub fn from_refs<S: Scalar>(
        enc: &EncoderConfig,
        tape: &mut Tape<S>,
        by_name: BTreeMap<String, TensorRef>,
    ) -> Result<Self, TrainError> {
        let encoder = EncoderBinding::bind(enc, tape, |_, name| {
            by_name
                .get(name)
                .copied()
                .ok_or_else(|| TrainError::BadConfig(format!("missing parameter `{name}`")))
        })?;
        let fetch = |name: &str| {
            by_name
                .get(name)
                .copied()
                .ok_or_else(|| TrainError::BadConfig(format!("missing parameter `{name}`")))
        };
        Ok(Self {
            table: fetch("table.rows")?,
            head_w: fetch("head.w")?,
            head_b: fetch("head.b")?,
            encoder,
            by_name,
        })
    }
}

/// One directed presentation of an undirected positive edge with its
/// corruptions, in graph vertex indices.
#[derive(Debug, Clone)]
pub struct Presentation {
    pub src: usize,
    pub dst: usize,
    pub negatives: Vec<usize>,
}

/// Immutable per-run data the batch loss needs: complexity targets with
/// their table rows, precomputed text inputs for every course, and the
/// graph-vertex to embedding-source mapping.
pub struct TrainContext<S: Scalar> {
    pub records: Vec<ComplexityRecord>,
    pub record_rows: Vec<usize>,
    pub course_inputs: Vec<CourseInput<S>>,
    pub entity_sources: Vec<EntitySource>,
}

impl<S: Scalar> TrainContext<S> {
    pub fn prepare(
        model: &Model<S>,
        corpus: &Corpus,
        graph: &RelationGraph,
        textenc: &TextEncoder<S>,
    ) -> Result<Self, TrainError> {
        let idx = crate::corpus::occurrence_index(corpus);
        let records = compute_complexity(&idx, corpus);
        let record_rows = records
            .iter()
            .map(|r| {
                model
                    .concept_ids
                    .iter()
                    .position(|id| *id == r.concept_id)
                    .expect("records come from the same corpus")
            })
            .collect();
        let mut course_inputs = Vec::with_capacity(corpus.courses.len());
        for course in 0..corpus.courses.len() {
            course_inputs.push(course_input(model, corpus, textenc, course)?);
        }
        let entity_sources = model.entity_sources(graph);
        Ok(Self {
            records,
            record_rows,
            course_inputs,
            entity_sources,
        })
    }
}

/// Stack a course's lecture text vectors and module positions.
pub fn course_input<S: Scalar>(
    model: &Model<S>,
    corpus: &Corpus,
    textenc: &TextEncoder<S>,
    course: usize,
) -> Result<CourseInput<S>, TrainError> {
    let seq = corpus.course_lecture_seq(course);
    let mut data = Vec::with_capacity(seq.len() * model.cfg.text_dim);
    for &li in &seq {
        let lecture = &corpus.lectures[li];
        let tv = textenc.encode(&lecture.id, &lecture.text())?;
        data.extend(tv.values);
    }
    Ok(CourseInput {
        text: Tensor::matrix(seq.len(), model.cfg.text_dim, data)?,
        module_positions: corpus.course_module_positions(course),
    })
}

/// The combined loss of one batch on an open tape.
///
/// Returns `(combined, triplet, mse)` handles. Course embeddings are
/// recomputed through the encoder for every batch that mentions them, so
/// the graph objective backpropagates into encoder weights; concept and
/// lecture embeddings are gathered table rows. The complexity term always
/// covers every record.
pub fn batch_loss<S: Scalar>(
    tape: &mut Tape<S>,
    model: &Model<S>,
    bindings: &Bindings,
    ctx: &TrainContext<S>,
    batch: &[Presentation],
) -> Result<(TensorRef, TensorRef, TensorRef), TrainError> {
    let enc = model.cfg.encoder();
    let mut cache: HashMap<usize, TensorRef> = HashMap::new();
    let mut materialize = |tape: &mut Tape<S>, vertex: usize| -> Result<TensorRef, TrainError> {
        if let Some(&r) = cache.get(&vertex) {
            return Ok(r);
        }
        let r = match ctx.entity_sources[vertex] {
            EntitySource::TableRow(row) => {
                debug_assert!(row < model.table_row_count());
                tape.gather_rows(bindings.table, &[row])?
            }
            EntitySource::Course(course) => {
                encode_course(tape, &enc, &bindings.encoder, &ctx.course_inputs[course])?
            }
        };
        cache.insert(vertex, r);
        Ok(r)
    };

    let mut samples = Vec::with_capacity(batch.len());
    for p in batch {
        let src = materialize(tape, p.src)?;
        let dst = materialize(tape, p.dst)?;
        let corrupt_dsts = p
            .negatives
            .iter()
            .map(|&n| materialize(tape, n))
            .collect::<Result<Vec<_>, _>>()?;
        samples.push(TripletSample {
            src,
            dst,
            corrupt_dsts,
        });
    }
    let weights = model.cfg.weights();
    let l_triplet = triplet_loss(tape, &samples, &weights)?;

    let record_rows = tape.gather_rows(bindings.table, &ctx.record_rows)?;
    let l_mse = complexity_loss(
        tape,
        &ctx.records,
        record_rows,
        bindings.head_w,
        bindings.head_b,
        model.cfg.mse_mean,
    )?;
    let combined = combined_loss(tape, l_triplet, l_mse, weights.lambda1)?;
    Ok((combined, l_triplet, l_mse))
}

/// Seeded presentation sample for gradient verification, covering every
/// parameter class: table rows through lecture-concept and implicit
/// edges, the encoder through course edges. Course presentations
/// dominate on purpose — encoder attention gradients are the smallest in
/// the model, and every extra non-course term only adds loss magnitude
/// (hence central-difference noise) without touching them.
pub fn gradcheck_batch(
    graph: &RelationGraph,
    negatives: usize,
    seed: u64,
) -> Vec<Presentation> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "gradcheck"));
    let mut lecture = Vec::new();
    let mut course = Vec::new();
    let mut implicit = Vec::new();
    for e in graph.edges() {
        for (s, d) in [(e.a, e.b), (e.b, e.a)] {
            if e.etype.is_implicit() {
                implicit.push((s, d));
            } else if e.etype == crate::graph::EdgeType::CourseConcept {
                course.push((s, d));
            } else {
                lecture.push((s, d));
            }
        }
    }
    let mut batch = Vec::new();
    for (take, pool) in [(2, &mut lecture), (10, &mut course), (2, &mut implicit)] {
        for _ in 0..take.min(pool.len()) {
            let i = rng.gen_range(0..pool.len());
            let (src, dst) = pool.swap_remove(i);
            let draw = graph.sample_negatives(src, dst, negatives, &mut rng);
            batch.push(Presentation {
                src,
                dst,
                negatives: draw.samples.iter().map(|s| s.dst_corrupt).collect(),
            });
        }
    }
    batch
}

/// Per-epoch loss trace.
///
/// `triplet` sums the hinge loss over the epoch's batches (each
/// presentation counted once); `mse` is the full regression objective
/// evaluated at the end of the epoch; `total` combines them with the
/// configured trade-off.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub triplet: Vec<f64>,
    pub mse: Vec<f64>,
    pub total: Vec<f64>,
}

impl History {
    pub fn epochs(&self) -> usize {
        self.total.len()
    }
}

/// Everything `train` returns: the final model, optimizer state (for
/// resume), the loss history, and accumulated absolute gradients per
/// parameter (for dead-parameter diagnostics).
pub struct Trained<S: Scalar> {
    pub model: Model<S>,
    pub adam: AdamState<S>,
    pub epoch: usize,
    pub history: History,
    pub grad_accum: BTreeMap<String, Tensor<S>>,
}

/// Train from scratch for `cfg.epochs` epochs.
pub fn train<S: Scalar>(
    cfg: &TrainConfig,
    corpus: &Corpus,
    graph: &RelationGraph,
    textenc: &TextEncoder<S>,
) -> Result<Trained<S>, TrainError> {
    let model = Model::init(cfg, corpus, textenc)?;
    let adam = AdamState::new(S::from_double(cfg.lr), &model.param_shapes());
    let grad_accum = model
        .params
        .iter()
        .map(|(name, t)| (name.clone(), Tensor::zeros(t.shape().to_vec())))
        .collect();
    let mut state = Trained {
        model,
        adam,
        epoch: 0,
        history: History::default(),
        grad_accum,
    };
    run_epochs(&mut state, corpus, graph, textenc, cfg.epochs)?;
    Ok(state)
}

/// Continue a run (fresh or checkpoint-loaded) up to `target_epochs`.
pub fn run_epochs<S: Scalar>(
    state: &mut Trained<S>,
    corpus: &Corpus,
    graph: &RelationGraph,
    textenc: &TextEncoder<S>,
    target_epochs: usize,
) -> Result<(), TrainError> {
    let ctx = TrainContext::prepare(&state.model, corpus, graph, textenc)?;
    let cfg = state.model.cfg.clone();
    let names = state.model.param_names();

    while state.epoch < target_epochs {
        let epoch = state.epoch;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("epoch{epoch}")));

        // Each undirected edge is presented once per orientation, with
        // fresh corruptions of the destination.
        let mut order: Vec<(usize, usize)> = graph
            .edges()
            .iter()
            .flat_map(|e| [(e.a, e.b), (e.b, e.a)])
            .collect();
        order.shuffle(&mut rng);
        let total = order.len();
        let mut starved = 0usize;
        let presentations: Vec<Presentation> = order
            .into_iter()
            .map(|(src, dst)| {
                let draw = graph.sample_negatives(src, dst, cfg.negatives, &mut rng);
                if draw.starved {
                    starved += 1;
                }
                Presentation {
                    src,
                    dst,
                    negatives: draw.samples.iter().map(|s| s.dst_corrupt).collect(),
                }
            })
            .collect();
        if starved * 2 > total && total > 0 {
            return Err(TrainError::Starvation {
                epoch,
                starved,
                total,
            });
        }

        let mut triplet_sum = 0.0f64;
        for (batch_no, batch) in presentations.chunks(cfg.batch_size).enumerate() {
            let mut tape = Tape::new();
            let bindings = Bindings::bind(&state.model, &mut tape)?;
            let step = (|| -> Result<f64, TrainError> {
                let (loss, l_triplet, _) =
                    batch_loss(&mut tape, &state.model, &bindings, &ctx, batch)?;
                let triplet_value = tape.item(l_triplet)?.to_double();
                let grads = tape.backward(loss)?;
                apply_update(state, &names, &bindings, &grads)?;
                Ok(triplet_value)
            })();
            match step {
                Ok(v) => triplet_sum += v,
                Err(TrainError::Numeric(e @ NumericError::NonFinite { .. })) => {
                    return Err(TrainError::NonFinite {
                        epoch,
                        batch: batch_no,
                        source: e,
                    });
                }
                Err(other) => return Err(other),
            }
        }

        let mse_end = mse_value(&state.model, &ctx);
        state.history.triplet.push(triplet_sum);
        state.history.mse.push(mse_end);
        state
            .history
            .total
            .push(cfg.lambda1 * triplet_sum + (1.0 - cfg.lambda1) * mse_end);
        state.epoch += 1;
    }
    Ok(())
}

fn apply_update<S: Scalar>(
    state: &mut Trained<S>,
    names: &[String],
    bindings: &Bindings,
    grads: &Gradients<S>,
) -> Result<(), TrainError> {
    let zero_like: Vec<Tensor<S>> = names
        .iter()
        .map(|n| Tensor::zeros(state.model.params[n].shape().to_vec()))
        .collect();
    let grad_tensors: Vec<&Tensor<S>> = names
        .iter()
        .enumerate()
        .map(|(i, n)| grads.wrt(bindings.by_name[n]).unwrap_or(&zero_like[i]))
        .collect();
    for (name, g) in names.iter().zip(&grad_tensors) {
        let acc = state.grad_accum.get_mut(name).expect("accumulator exists");
        for (a, &v) in acc.data_mut().iter_mut().zip(g.data()) {
            *a += v.abs();
        }
    }
    let mut params: Vec<&mut Tensor<S>> = Vec::with_capacity(names.len());
    // BTreeMap iterates in key order, matching `names`.
    for (_, tensor) in state.model.params.iter_mut() {
        params.push(tensor);
    }
    state.adam.step(&mut params, &grad_tensors)?;
    Ok(())
}

/// Current value of the complexity regression, off-tape.
fn mse_value<S: Scalar>(model: &Model<S>, ctx: &TrainContext<S>) -> f64 {
    let table = &model.params["table.rows"];
    let w = &model.params["head.w"];
    let b = model.params["head.b"].data()[0].to_double();
    let mut total = 0.0f64;
    for (record, &row) in ctx.records.iter().zip(&ctx.record_rows) {
        let e = table.row(row);
        let pred: f64 = e
            .iter()
            .enumerate()
            .map(|(j, &x)| x.to_double() * w.data()[j].to_double())
            .sum::<f64>()
            + b;
        let resid = record.d - pred;
        total += resid * resid;
    }
    if model.cfg.mse_mean && !ctx.records.is_empty() {
        total /= ctx.records.len() as f64;
    }
    total
}

/// Final entity embeddings: table rows for concepts and lectures, encoder
/// outputs for courses.
pub fn entity_embeddings<S: Scalar>(
    model: &Model<S>,
    corpus: &Corpus,
    textenc: &TextEncoder<S>,
) -> Result<EmbeddingSet<S>, TrainError> {
    let mut set = EmbeddingSet::new(model.cfg.dim);
    let table = &model.params["table.rows"];
    for (i, id) in model
        .concept_ids
        .iter()
        .chain(model.lecture_ids.iter())
        .enumerate()
    {
        set.insert(id, table.row(i).to_vec())?;
    }
    let enc = model.cfg.encoder();
    for (course, id) in model.course_ids.iter().enumerate() {
        let input = course_input(model, corpus, textenc, course)?;
        let mut tape = Tape::new();
        let by_name: Result<BTreeMap<String, TensorRef>, NumericError> = model
            .params
            .iter()
            .map(|(n, t)| {
                let mut t = t.clone();
                t.requires_grad = false;
                Ok((n.clone(), tape.leaf(t)?))
            })
            .collect();
        let bindings = Bindings::from_refs(&enc, &mut tape, by_name?)?;
        let z = encode_course(&mut tape, &enc, &bindings.encoder, &input)?;
        set.insert(id, tape.value(z).data().to_vec())?;
    }
    Ok(set)
}
