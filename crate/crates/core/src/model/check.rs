use crate::error::Result;
use crate::scalar::Scalar;

use super::{forward, nll_loss, Batch, GradientVector, ModelSpec, ParameterVector};

/// Central-difference estimate of the loss gradient, one coordinate at a
/// time. Costs two forward passes per parameter; meant for verification.
pub fn finite_diff_gradient<T: Scalar>(
    spec: &ModelSpec,
    params: &ParameterVector<T>,
    batch: &Batch<'_, T>,
    h: T,
) -> Result<GradientVector<T>> {
    if !(h > T::zero()) {
        return Err(crate::Error::config("finite-difference step must be positive"));
    }
    let loss_at = |p: &ParameterVector<T>| -> Result<T> {
        let lp = forward(spec, p, batch)?;
        nll_loss(&lp, batch.labels())
    };
    let mut probe = params.clone();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe.values[i];
        let (hi, lo) = (orig + h, orig - h);
        probe.values[i] = hi;
        let up = loss_at(&probe)?;
        probe.values[i] = lo;
        let down = loss_at(&probe)?;
        probe.values[i] = orig;
        // divide by the representable spacing, not the nominal 2h
        grad.push((up - down) / (hi - lo));
    }
    Ok(GradientVector::new(grad, batch.len()))
}
