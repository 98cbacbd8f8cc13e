//! Central-difference verification of tape gradients.

use crate::scalar::Scalar;

use super::tape::{Tape, TensorRef};
use super::tensor::Tensor;
use super::NumericError;

/// Compare tape gradients of `f` against central differences.
///
/// `f` receives a fresh tape plus one leaf per parameter (in order) and
/// must return a scalar loss. Every parameter element is perturbed by
/// `+h`/`-h` and compared elementwise; the result is the worst absolute
/// deviation normalized by the gradient's overall magnitude,
/// `max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-8)`.
///
/// Normalizing at the gradient scale (rather than per element) keeps the
/// check meaningful at 64 bits: central differences carry an irreducible
/// `ulp(|loss|) / 2h` absolute noise floor, which swamps any per-element
/// ratio wherever an individual entry happens to be tiny, while a wrong
/// backward rule distorts whole paths in proportion to their size and
/// lands orders of magnitude above this measure's noise.
pub fn grad_check<S, F>(params: &[Tensor<S>], h: S, f: F) -> Result<S, NumericError>
where
    S: Scalar,
    F: Fn(&mut Tape<S>, &[TensorRef]) -> Result<TensorRef, NumericError>,
{
    let eval = |values: &[Tensor<S>], want_grads: bool| -> Result<(S, Vec<Tensor<S>>), NumericError> {
        let mut tape = Tape::new();
        let refs: Vec<TensorRef> = values
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.requires_grad = want_grads;
                tape.leaf(t)
            })
            .collect::<Result<_, _>>()?;
        let loss = f(&mut tape, &refs)?;
        let value = tape.item(loss)?;
        if !want_grads {
            return Ok((value, Vec::new()));
        }
        let grads = tape.backward(loss)?;
        let out = refs
            .iter()
            .map(|&r| grads.wrt(r).expect("grad leaf").clone())
            .collect();
        Ok((value, out))
    };

    let (_, analytic) = eval(params, true)?;

    let floor = S::from_double(1e-8);
    let two = S::from_double(2.0);
    let mut worst = S::zero();
    let mut work: Vec<Tensor<S>> = params.to_vec();
    for pi in 0..params.len() {
        let mut max_diff = S::zero();
        let mut max_analytic = S::zero();
        let mut max_numeric = S::zero();
        for i in 0..params[pi].len() {
            let orig = work[pi].data()[i];
            work[pi].data_mut()[i] = orig + h;
            let (plus, _) = eval(&work, false)?;
            work[pi].data_mut()[i] = orig - h;
            let (minus, _) = eval(&work, false)?;
            work[pi].data_mut()[i] = orig;

            let numeric = (plus - minus) / (two * h);
            let a = analytic[pi].data()[i];
            max_diff = max_diff.max((a - numeric).abs());
            max_analytic = max_analytic.max(a.abs());
            max_numeric = max_numeric.max(numeric.abs());
        }
        let denom = max_analytic.max(max_numeric).max(floor);
        let err = max_diff / denom;
        if err > worst {
            worst = err;
        }
    }
    Ok(worst)
}
