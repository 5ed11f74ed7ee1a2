use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{check_labels, Batch, GradientVector, LayerLayout, Matrix, ModelSpec, ParameterVector};

/// Affine map `out = input · Wᵀ + b` for every row of `input`.
fn affine<T: Scalar>(layer: &LayerLayout, params: &[T], input: &Matrix<T>) -> Matrix<T> {
    let w = &params[layer.weights()];
    let b = &params[layer.biases()];
    let mut out = Matrix::zeros(input.rows, layer.outputs);
    for r in 0..input.rows {
        let x = input.row(r);
        for (o, z) in out.row_mut(r).iter_mut().enumerate() {
            let wo = &w[o * layer.inputs..(o + 1) * layer.inputs];
            let mut acc = b[o];
            for (&wi, &xi) in wo.iter().zip(x) {
                acc += wi * xi;
            }
            *z = acc;
        }
    }
    out
}

fn ensure_finite<T: Scalar>(m: &Matrix<T>, layer: usize) -> Result<()> {
    if m.data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(format!("layer {layer}")))
    }
}

/// In-place log-softmax of every row, shifted by the row maximum.
fn log_softmax_rows<T: Scalar>(m: &mut Matrix<T>) {
    for r in 0..m.rows {
        let row = m.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
        for z in row.iter_mut() {
            *z -= lse;
        }
    }
}

/// Activations of every layer input plus the final log-probabilities.
struct Trace<T> {
    inputs: Vec<Matrix<T>>,
    log_probs: Matrix<T>,
}

fn run_forward<T: Scalar>(
    spec: &ModelSpec,
    params: &[T],
    batch: &Batch<'_, T>,
    keep_inputs: bool,
) -> Result<Trace<T>> {
    spec.check_params(params.len())?;
    batch.conform(spec)?;
    let mut act = Matrix {
        rows: batch.len(),
        cols: batch.input_dim(),
        data: batch.features().to_vec(),
    };
    let last = spec.num_layers() - 1;
    let mut inputs = Vec::new();
    for layer in spec.layers() {
        let mut z = affine(&layer, params, &act);
        if layer.index == last {
            log_softmax_rows(&mut z);
        } else {
            z.data.iter_mut().for_each(|v| *v = v.tanh());
        }
        ensure_finite(&z, layer.index)?;
        if keep_inputs {
            inputs.push(act);
        }
        act = z;
    }
    Ok(Trace {
        inputs,
        log_probs: act,
    })
}

/// Log-probabilities, one row per sample.
pub fn forward<T: Scalar>(
    spec: &ModelSpec,
    params: &ParameterVector<T>,
    batch: &Batch<'_, T>,
) -> Result<Matrix<T>> {
    run_forward(spec, &params.values, batch, false).map(|t| t.log_probs)
}

/// Mean negative log-likelihood of the true labels.
pub fn nll_loss<T: Scalar>(log_probs: &Matrix<T>, labels: &[usize]) -> Result<T> {
    if log_probs.rows != labels.len() {
        return Err(Error::config(format!(
            "{} rows of log-probabilities for {} labels",
            log_probs.rows,
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::data("loss of an empty batch"));
    }
    check_labels(labels, log_probs.cols)?;
    let total: T = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -log_probs.row(i)[y])
        .sum();
    // log-probabilities are ≤ 0 up to rounding; clamp keeps the loss non-negative
    let loss = (total / T::from_usize_lossy(labels.len())).max(T::zero());
    if !loss.is_finite() {
        return Err(Error::numeric("nll loss"));
    }
    Ok(loss)
}

/// Analytic gradient of the mean NLL by backpropagation.
pub fn gradient<T: Scalar>(
    spec: &ModelSpec,
    params: &ParameterVector<T>,
    batch: &Batch<'_, T>,
) -> Result<GradientVector<T>> {
    let trace = run_forward(spec, &params.values, batch, true)?;
    let n = batch.len();
    let inv_n = T::one() / T::from_usize_lossy(n);

    // d loss / d logits = (softmax - onehot) / n
    let mut delta = trace.log_probs;
    for (r, &y) in batch.labels().iter().enumerate() {
        let row = delta.row_mut(r);
        for z in row.iter_mut() {
            *z = z.exp();
        }
        row[y] -= T::one();
        for z in row.iter_mut() {
            *z *= inv_n;
        }
    }

    let mut grad = vec![T::zero(); spec.param_count()];
    let layers: Vec<_> = spec.layers().collect();
    for layer in layers.iter().rev() {
        let input = &trace.inputs[layer.index];
        {
            let (gw, gb) = grad[layer.offset..layer.offset + layer.param_count()]
                .split_at_mut(layer.outputs * layer.inputs);
            for r in 0..n {
                let d = delta.row(r);
                let x = input.row(r);
                for (o, &dv) in d.iter().enumerate() {
                    gb[o] += dv;
                    for (g, &xi) in gw[o * layer.inputs..(o + 1) * layer.inputs]
                        .iter_mut()
                        .zip(x)
                    {
                        *g += dv * xi;
                    }
                }
            }
        }
        if layer.index > 0 {
            // input here is tanh output a; tanh' = 1 - a²
            let w = &params.values[layer.weights()];
            let mut prev = Matrix::zeros(n, layer.inputs);
            for r in 0..n {
                let d = delta.row(r);
                let a = input.row(r);
                let p = prev.row_mut(r);
                for (o, &dv) in d.iter().enumerate() {
                    for (pi, &wi) in p.iter_mut().zip(&w[o * layer.inputs..(o + 1) * layer.inputs]) {
                        *pi += dv * wi;
                    }
                }
                for (pi, &ai) in p.iter_mut().zip(a) {
                    *pi *= T::one() - ai * ai;
                }
            }
            delta = prev;
        }
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric("gradient"));
    }
    Ok(GradientVector::new(grad, n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// Index of the largest entry; the lowest index wins ties.
pub(crate) fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mean NLL and argmax accuracy over a whole dataset.
pub fn evaluate<T: Scalar>(
    spec: &ModelSpec,
    params: &ParameterVector<T>,
    data: &Batch<'_, T>,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::data("cannot evaluate on an empty dataset"));
    }
    let log_probs = forward(spec, params, data)?;
    let loss = nll_loss(&log_probs, data.labels())?;
    let hits = data
        .labels()
        .iter()
        .enumerate()
        .filter(|&(i, &y)| argmax(log_probs.row(i)) == y)
        .count();
    Ok(Evaluation {
        loss: loss.to_f64_lossy(),
        accuracy: hits as f64 / data.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sgd_apply;

    const LN10: f64 = std::f64::consts::LN_10;

    #[test]
    fn zero_params_give_uniform_log_probs() {
        let spec = ModelSpec::softmax_regression(3, 10).unwrap();
        let params = ParameterVector::<f64>::zeros(&spec);
        let x = [0.3, -1.0, 2.0, 5.0, 0.0, -0.5];
        let batch = Batch::new(&x, &[1, 7], 3).unwrap();
        let lp = forward(&spec, &params, &batch).unwrap();
        for v in &lp.data {
            assert!((v + LN10).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn identity_weights_pick_hot_feature() {
        let spec = ModelSpec::softmax_regression(4, 4).unwrap();
        let mut params = ParameterVector::<f64>::zeros(&spec);
        for j in 0..4 {
            params.values[j * 4 + j] = 1.0;
        }
        for j in 0..4 {
            let mut x = [0.0; 4];
            x[j] = 1.0;
            let batch = Batch::new(&x, &[0], 4).unwrap();
            let lp = forward(&spec, &params, &batch).unwrap();
            assert_eq!(argmax(lp.row(0)), j);
        }
    }

    #[test]
    fn log_softmax_survives_large_logits() {
        let spec = ModelSpec::softmax_regression(1, 3).unwrap();
        let params = ParameterVector::new(vec![1000.0, -1000.0, 999.0, 0.0, 0.0, 0.0]);
        let batch = Batch::new(&[1.0], &[0], 1).unwrap();
        let lp = forward(&spec, &params, &batch).unwrap();
        let s: f64 = lp.row(0).iter().map(|v: &f64| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_reports_failing_layer() {
        let spec = ModelSpec::new(1, 2, vec![1]).unwrap();
        let params = ParameterVector::new(vec![f64::NAN, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let batch = Batch::new(&[1.0], &[0], 1).unwrap();
        match forward(&spec, &params, &batch) {
            Err(Error::Numeric { context }) => assert_eq!(context, "layer 0"),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn forward_dimension_mismatch() {
        let spec = ModelSpec::softmax_regression(2, 3).unwrap();
        let params = ParameterVector::<f64>::zeros(&spec);
        let batch = Batch::new(&[1.0, 2.0, 3.0], &[0], 3).unwrap();
        assert!(forward(&spec, &params, &batch).unwrap_err().is_config());
        let short = ParameterVector::new(vec![0.0; 4]);
        let batch = Batch::new(&[1.0, 2.0], &[0], 2).unwrap();
        assert!(forward(&spec, &short, &batch).unwrap_err().is_config());
    }

    #[test]
    fn nll_examples() {
        let uniform = Matrix {
            rows: 3,
            cols: 10,
            data: vec![-LN10; 30],
        };
        assert!((nll_loss(&uniform, &[0, 4, 9]).unwrap() - LN10).abs() < 1e-12);

        let perfect = Matrix::from_rows(&[vec![0.0, f64::NEG_INFINITY], vec![f64::NEG_INFINITY, 0.0]]).unwrap();
        assert_eq!(nll_loss(&perfect, &[0, 1]).unwrap(), 0.0);

        let lp = Matrix::from_rows(&[vec![0.5f64.ln(), 0.5f64.ln()], vec![0.75f64.ln(), 0.25f64.ln()]]).unwrap();
        let loss = nll_loss(&lp, &[0, 1]).unwrap();
        assert!((loss - 1.039_720_770_839_917_9).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn nll_errors() {
        let lp = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(nll_loss(&lp, &[0, 3]), Err(Error::Data(_))));
        assert!(nll_loss(&lp, &[0]).unwrap_err().is_config());
    }

    #[test]
    fn zero_param_bias_gradient_is_class_frequency_gap() {
        let spec = ModelSpec::softmax_regression(2, 10).unwrap();
        let params = ParameterVector::<f64>::zeros(&spec);
        let x = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8];
        let labels = [3, 3, 5, 0];
        let batch = Batch::new(&x, &labels, 2).unwrap();
        let g = gradient(&spec, &params, &batch).unwrap();
        assert_eq!(g.sample_count, 4);
        let layer = spec.layers().next().unwrap();
        let gb = &g.values[layer.biases()];
        for (c, &b) in gb.iter().enumerate() {
            let freq = labels.iter().filter(|&&y| y == c).count() as f64 / 4.0;
            assert!((b - (0.1 - freq)).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let spec = ModelSpec::new(3, 4, vec![5]).unwrap();
        let params = ParameterVector::<f64>::init(&spec, 3);
        let x = [0.1, -0.2, 0.3, 1.0, 0.5, -0.7];
        let labels = [2, 1];
        let xx = [&x[..3], &x[..3], &x[3..], &x[3..]].concat();
        let yy = [2, 2, 1, 1];
        let g1 = gradient(&spec, &params, &Batch::new(&x, &labels, 3).unwrap()).unwrap();
        let g2 = gradient(&spec, &params, &Batch::new(&xx, &yy, 3).unwrap()).unwrap();
        for (a, b) in g1.values.iter().zip(&g2.values) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn evaluate_uniform_predictor() {
        let spec = ModelSpec::softmax_regression(1, 10).unwrap();
        let params = ParameterVector::<f64>::zeros(&spec);
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let y: Vec<usize> = (0..100).map(|i| i % 10).collect();
        let eval = evaluate(&spec, &params, &Batch::new(&x, &y, 1).unwrap()).unwrap();
        assert!((eval.loss - LN10).abs() < 1e-12);
        // all ties resolve to class 0
        assert!((eval.accuracy - 0.1).abs() < 1e-12);
    }

    #[test]
    fn evaluate_empty_is_data_error() {
        let spec = ModelSpec::softmax_regression(2, 3).unwrap();
        let params = ParameterVector::<f64>::zeros(&spec);
        let batch = Batch::new(&[], &[], 2).unwrap();
        assert!(matches!(evaluate(&spec, &params, &batch), Err(Error::Data(_))));
    }

    #[test]
    fn single_point_overfits() {
        let spec = ModelSpec::softmax_regression(3, 4).unwrap();
        let mut params = ParameterVector::<f64>::zeros(&spec);
        let x = [0.5, -1.0, 2.0];
        let batch = Batch::new(&x, &[2], 3).unwrap();
        for _ in 0..50 {
            let g = gradient(&spec, &params, &batch).unwrap();
            params = sgd_apply(&params, &g, 0.1).unwrap();
        }
        assert_eq!(evaluate(&spec, &params, &batch).unwrap().accuracy, 1.0);
    }

    #[test]
    fn accuracy_ignores_logit_shift() {
        // shifting every bias by the same constant shifts every logit of every row
        let spec = ModelSpec::softmax_regression(2, 3).unwrap();
        let params = ParameterVector::<f64>::init(&spec, 5);
        let x = [1.0, 2.0, -1.0, 0.5, 0.3, -0.2];
        let y = [0, 1, 2];
        let batch = Batch::new(&x, &y, 2).unwrap();
        let mut shifted = params.clone();
        let layer = spec.layers().next().unwrap();
        for b in &mut shifted.values[layer.biases()] {
            *b += 17.25;
        }
        let a = evaluate(&spec, &params, &batch).unwrap();
        let b = evaluate(&spec, &shifted, &batch).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert!((a.loss - b.loss).abs() < 1e-12);
    }

    #[test]
    fn f32_instantiation_works() {
        let spec = ModelSpec::softmax_regression(2, 3).unwrap();
        let params = ParameterVector::<f32>::init(&spec, 1);
        let x = [1.0_f32, -1.0];
        let batch = Batch::new(&x, &[2], 2).unwrap();
        let g = gradient(&spec, &params, &batch).unwrap();
        assert_eq!(g.len(), spec.param_count());
    }
}
