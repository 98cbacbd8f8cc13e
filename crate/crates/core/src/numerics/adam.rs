//! Bias-corrected Adam.

use crate::scalar::Scalar;

use super::tensor::Tensor;
use super::NumericError;

/// Per-parameter Adam moments plus the shared step counter.
///
/// Parameters are addressed positionally; callers must pass parameter and
/// gradient slices in the same order on every step.
#[derive(Debug, Clone)]
pub struct AdamState<S: Scalar> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
    pub step: u64,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
}

impl<S: Scalar> AdamState<S> {
    /// Fresh state with zero moments, matching the given parameter shapes.
    pub fn new(lr: S, shapes: &[Vec<usize>]) -> Self {
        Self {
            lr,
            beta1: S::from_double(0.9),
            beta2: S::from_double(0.999),
            epsilon: S::from_double(1e-8),
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.m.len()
    }

    pub fn moments(&self) -> (&[Tensor<S>], &[Tensor<S>]) {
        (&self.m, &self.v)
    }

    /// Restore previously saved moments; shapes must match the fresh state.
    pub fn restore(
        &mut self,
        step: u64,
        m: Vec<Tensor<S>>,
        v: Vec<Tensor<S>>,
    ) -> Result<(), NumericError> {
        if m.len() != self.m.len() || v.len() != self.v.len() {
            return Err(NumericError::ShapeMismatch {
                op: "adam_restore",
                detail: format!("{} moment pairs, expected {}", m.len(), self.m.len()),
            });
        }
        for (have, want) in m.iter().zip(&self.m).chain(v.iter().zip(&self.v)) {
            if have.shape() != want.shape() {
                return Err(NumericError::ShapeMismatch {
                    op: "adam_restore",
                    detail: format!("{:?} vs {:?}", have.shape(), want.shape()),
                });
            }
        }
        self.step = step;
        self.m = m;
        self.v = v;
        Ok(())
    }

    /// One bias-corrected update over all parameters.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<S>],
        grads: &[&Tensor<S>],
    ) -> Result<(), NumericError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NumericError::ShapeMismatch {
                op: "adam_step",
                detail: format!(
                    "{} params / {} grads, state holds {}",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = S::one() - self.beta1.powi(t);
        let bc2 = S::one() - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(NumericError::ShapeMismatch {
                    op: "adam_step",
                    detail: format!("param {:?} vs grad {:?}", p.shape(), g.shape()),
                });
            }
            for i in 0..p.len() {
                let gi = g.data()[i];
                let mi = self.beta1 * m.data()[i] + (S::one() - self.beta1) * gi;
                let vi = self.beta2 * v.data()[i] + (S::one() - self.beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let mhat = mi / bc1;
                let vhat = vi / bc2;
                p.data_mut()[i] = p.data()[i] - self.lr * mhat / (vhat.sqrt() + self.epsilon);
            }
            if !p.all_finite() {
                return Err(NumericError::NonFinite { op: "adam_step" });
            }
        }
        Ok(())
    }
}
