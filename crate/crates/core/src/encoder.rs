//! Segment-aware course encoder.
//!
//! A course is encoded as its lecture sequence: each lecture's text vector
//! is projected into model space and offset by a trainable lecture-position
//! row and a module-position row, a trainable summary token is appended at
//! the end, and the sequence runs through stacked transformer layers
//! (multi-head attention and a ReLU feed-forward block, each behind a
//! residual + layer norm). The course embedding is the summary position of
//! the last layer.

use crate::numerics::{NumericError, Tape, Tensor, TensorRef};
use crate::scalar::Scalar;

/// Attention logits at masked key positions get this additive offset; it
/// underflows to exactly zero weight after softmax while staying finite.
const MASK_OFFSET: f64 = -1e30;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Structural hyperparameters of the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Model width d.
    pub dim: usize,
    /// Transformer layer count (at least 1).
    pub layers: usize,
    /// Attention heads; must divide `dim`.
    pub heads: usize,
    /// Maximum lectures per course (capacity of the position table).
    pub max_lectures: usize,
    /// Maximum modules per course.
    pub max_modules: usize,
    /// Width of incoming text vectors.
    pub text_dim: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), NumericError> {
        if self.layers == 0 || self.heads == 0 || self.dim == 0 || self.dim % self.heads != 0 {
            return Err(NumericError::ShapeMismatch {
                op: "encoder_config",
                detail: format!(
                    "dim {} / layers {} / heads {} (heads must divide dim, all nonzero)",
                    self.dim, self.layers, self.heads
                ),
            });
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn ffn_dim(&self) -> usize {
        4 * self.dim
    }

    /// Names and shapes of every trainable tensor, in a fixed order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let d = self.dim;
        let hd = self.head_dim();
        let mut out = vec![
            ("enc.proj".to_string(), vec![self.text_dim, d]),
            ("enc.e_lp".to_string(), vec![self.max_lectures, d]),
            ("enc.e_mp".to_string(), vec![self.max_modules, d]),
            ("enc.cls".to_string(), vec![1, d]),
        ];
        for l in 0..self.layers {
            for h in 0..self.heads {
                out.push((format!("enc.l{l}.h{h}.wq"), vec![d, hd]));
                out.push((format!("enc.l{l}.h{h}.wk"), vec![d, hd]));
                out.push((format!("enc.l{l}.h{h}.wv"), vec![d, hd]));
            }
            out.push((format!("enc.l{l}.wo"), vec![d, d]));
            out.push((format!("enc.l{l}.ffn_w1"), vec![d, self.ffn_dim()]));
            out.push((format!("enc.l{l}.ffn_b1"), vec![self.ffn_dim()]));
            out.push((format!("enc.l{l}.ffn_w2"), vec![self.ffn_dim(), d]));
            out.push((format!("enc.l{l}.ffn_b2"), vec![d]));
            out.push((format!("enc.l{l}.ln1_gain"), vec![d]));
            out.push((format!("enc.l{l}.ln1_bias"), vec![d]));
            out.push((format!("enc.l{l}.ln2_gain"), vec![d]));
            out.push((format!("enc.l{l}.ln2_bias"), vec![d]));
        }
        out
    }
}

/// Tape handles for one layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerBinding {
    pub wq: Vec<TensorRef>,
    pub wk: Vec<TensorRef>,
    pub wv: Vec<TensorRef>,
    pub wo: TensorRef,
    pub ffn_w1: TensorRef,
    pub ffn_b1: TensorRef,
    pub ffn_w2: TensorRef,
    pub ffn_b2: TensorRef,
    pub ln1_gain: TensorRef,
    pub ln1_bias: TensorRef,
    pub ln2_gain: TensorRef,
    pub ln2_bias: TensorRef,
}

/// Tape handles for the whole encoder; built once per tape from a
/// name-keyed parameter lookup.
#[derive(Debug, Clone)]
pub struct EncoderBinding {
    pub proj: TensorRef,
    pub e_lp: TensorRef,
    pub e_mp: TensorRef,
    pub cls: TensorRef,
    pub layers: Vec<LayerBinding>,
    pub heads: usize,
}

impl EncoderBinding {
    /// Bind every encoder parameter as a tape leaf via `fetch`, which maps
    /// a parameter name to a leaf handle.
    pub fn bind<S: Scalar, E>(
        cfg: &EncoderConfig,
        tape: &mut Tape<S>,
        mut fetch: impl FnMut(&mut Tape<S>, &str) -> Result<TensorRef, E>,
    ) -> Result<Self, E> {
        let proj = fetch(tape, "enc.proj")?;
        let e_lp = fetch(tape, "enc.e_lp")?;
        let e_mp = fetch(tape, "enc.e_mp")?;
        let cls = fetch(tape, "enc.cls")?;
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let mut wq = Vec::new();
            let mut wk = Vec::new();
            let mut wv = Vec::new();
            for h in 0..cfg.heads {
                wq.push(fetch(tape, &format!("enc.l{l}.h{h}.wq"))?);
                wk.push(fetch(tape, &format!("enc.l{l}.h{h}.wk"))?);
                wv.push(fetch(tape, &format!("enc.l{l}.h{h}.wv"))?);
            }
            layers.push(LayerBinding {
                wq,
                wk,
                wv,
                wo: fetch(tape, &format!("enc.l{l}.wo"))?,
                ffn_w1: fetch(tape, &format!("enc.l{l}.ffn_w1"))?,
                ffn_b1: fetch(tape, &format!("enc.l{l}.ffn_b1"))?,
                ffn_w2: fetch(tape, &format!("enc.l{l}.ffn_w2"))?,
                ffn_b2: fetch(tape, &format!("enc.l{l}.ffn_b2"))?,
                ln1_gain: fetch(tape, &format!("enc.l{l}.ln1_gain"))?,
                ln1_bias: fetch(tape, &format!("enc.l{l}.ln1_bias"))?,
                ln2_gain: fetch(tape, &format!("enc.l{l}.ln2_gain"))?,
                ln2_bias: fetch(tape, &format!("enc.l{l}.ln2_bias"))?,
            });
        }
        Ok(Self {
            proj,
            e_lp,
            e_mp,
            cls,
            layers,
            heads: cfg.heads,
        })
    }
}

/// Course-side inputs: stacked lecture text vectors plus each flattened
/// lecture slot's module position.
#[derive(Debug, Clone)]
pub struct CourseInput<S: Scalar> {
    /// `[n_lectures, text_dim]`.
    pub text: Tensor<S>,
    /// Module index per lecture slot, length `n_lectures`.
    pub module_positions: Vec<usize>,
}

impl<S: Scalar> CourseInput<S> {
    pub fn lectures(&self) -> usize {
        self.module_positions.len()
    }

    pub fn check_limits(&self, cfg: &EncoderConfig) -> Result<(), NumericError> {
        let n = self.lectures();
        if n == 0 || n > cfg.max_lectures {
            return Err(NumericError::ShapeMismatch {
                op: "course_input",
                detail: format!("{n} lectures, capacity {}", cfg.max_lectures),
            });
        }
        if let Some(&m) = self.module_positions.iter().max() {
            if m >= cfg.max_modules {
                return Err(NumericError::ShapeMismatch {
                    op: "course_input",
                    detail: format!("module position {m}, capacity {}", cfg.max_modules),
                });
            }
        }
        Ok(())
    }
}

/// Position-aware lecture embeddings: projected text plus the lecture- and
/// module-position rows. Returns `[n_lectures, d]`.
pub fn position_aware_embed<S: Scalar>(
    tape: &mut Tape<S>,
    binding: &EncoderBinding,
    input: &CourseInput<S>,
) -> Result<TensorRef, NumericError> {
    let text = tape.constant(input.text.clone())?;
    let projected = tape.matmul(text, binding.proj)?;
    let n = input.lectures();
    let lecture_rows: Vec<usize> = (0..n).collect();
    let lp = tape.gather_rows(binding.e_lp, &lecture_rows)?;
    let mp = tape.gather_rows(binding.e_mp, &input.module_positions)?;
    let with_lp = tape.add(projected, lp)?;
    tape.add(with_lp, mp)
}

/// One transformer layer: post-norm residual attention then feed-forward.
/// `mask[j] = true` hides position `j` from every query.
pub fn transformer_layer<S: Scalar>(
    tape: &mut Tape<S>,
    layer: &LayerBinding,
    x: TensorRef,
    mask: Option<&[bool]>,
) -> Result<TensorRef, NumericError> {
    let n = tape.value(x).rows();
    let attn = multi_head_attention(tape, layer, x, n, mask)?;
    let res1 = tape.add(x, attn)?;
    let eps = S::from_double(LAYER_NORM_EPS);
    let h = tape.layer_norm(res1, layer.ln1_gain, layer.ln1_bias, eps)?;

    let pre1 = tape.matmul(h, layer.ffn_w1)?;
    let pre1b = tape.add_bias(pre1, layer.ffn_b1)?;
    let act = tape.relu(pre1b)?;
    let pre2 = tape.matmul(act, layer.ffn_w2)?;
    let ffn = tape.add_bias(pre2, layer.ffn_b2)?;
    let res2 = tape.add(h, ffn)?;
    tape.layer_norm(res2, layer.ln2_gain, layer.ln2_bias, eps)
}

fn multi_head_attention<S: Scalar>(
    tape: &mut Tape<S>,
    layer: &LayerBinding,
    x: TensorRef,
    n: usize,
    mask: Option<&[bool]>,
) -> Result<TensorRef, NumericError> {
    let mask_ref = match mask {
        Some(flags) => {
            debug_assert_eq!(flags.len(), n);
            let mut data = vec![S::zero(); n * n];
            for (j, &hidden) in flags.iter().enumerate() {
                if hidden {
                    for i in 0..n {
                        data[i * n + j] = S::from_double(MASK_OFFSET);
                    }
                }
            }
            Some(tape.constant(Tensor::matrix(n, n, data)?)?)
        }
        None => None,
    };

    let head_dim = tape.value(layer.wq[0]).cols();
    let scale = S::from_double(1.0 / (head_dim as f64).sqrt());
    let mut concat: Option<TensorRef> = None;
    for h in 0..layer.wq.len() {
        let q = tape.matmul(x, layer.wq[h])?;
        let k = tape.matmul(x, layer.wk[h])?;
        let v = tape.matmul(x, layer.wv[h])?;
        let kt = tape.transpose(k)?;
        let logits_raw = tape.matmul(q, kt)?;
        let mut logits = tape.scale(logits_raw, scale)?;
        if let Some(m) = mask_ref {
            logits = tape.add(logits, m)?;
        }
        let weights = tape.softmax_rows(logits)?;
        let head_out = tape.matmul(weights, v)?;
        concat = Some(match concat {
            Some(prev) => tape.concat_cols(prev, head_out)?,
            None => head_out,
        });
    }
    tape.matmul(concat.expect("at least one head"), layer.wo)
}

/// Full course encoding: position-aware lecture sequence with the summary
/// token appended, passed through every layer; returns the `[1, d]` summary
/// position of the final layer.
pub fn encode_course<S: Scalar>(
    tape: &mut Tape<S>,
    cfg: &EncoderConfig,
    binding: &EncoderBinding,
    input: &CourseInput<S>,
) -> Result<TensorRef, NumericError> {
    cfg.validate()?;
    input.check_limits(cfg)?;
    let lectures = position_aware_embed(tape, binding, input)?;
    let mut seq = tape.concat_rows(lectures, binding.cls)?;
    for layer in &binding.layers {
        seq = transformer_layer(tape, layer, seq, None)?;
    }
    let last = tape.value(seq).rows() - 1;
    tape.gather_rows(seq, &[last])
}

/// Variant used by the padding-invariance property: `pad` extra masked
/// positions (zero vectors) are appended after the lectures, before the
/// summary token.
pub fn encode_course_padded<S: Scalar>(
    tape: &mut Tape<S>,
    cfg: &EncoderConfig,
    binding: &EncoderBinding,
    input: &CourseInput<S>,
    pad: usize,
) -> Result<TensorRef, NumericError> {
    cfg.validate()?;
    input.check_limits(cfg)?;
    let lectures = position_aware_embed(tape, binding, input)?;
    let d = tape.value(lectures).cols();
    let mut seq = lectures;
    if pad > 0 {
        let zeros = tape.constant(Tensor::zeros(vec![pad, d]))?;
        seq = tape.concat_rows(seq, zeros)?;
    }
    seq = tape.concat_rows(seq, binding.cls)?;
    let n = tape.value(seq).rows();
    let mut mask = vec![false; n];
    for flag in mask
        .iter_mut()
        .take(input.lectures() + pad)
        .skip(input.lectures())
    {
        *flag = true;
    }
    for layer in &binding.layers {
        seq = transformer_layer(tape, layer, seq, Some(&mask))?;
    }
    let last = tape.value(seq).rows() - 1;
    tape.gather_rows(seq, &[last])
}
