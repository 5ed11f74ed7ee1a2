//! Differentiable classifiers: softmax regression and tanh MLPs trained with
//! negative log-likelihood.
//!
//! Parameters are stored flat. Layer `l` maps `dims[l]` inputs to
//! `dims[l + 1]` outputs and occupies a row-major `out × in` weight block
//! followed by `out` biases.

mod check;
mod network;

pub use check::finite_diff_gradient;
pub use network::{evaluate, forward, gradient, nll_loss, Evaluation};

use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Half-width of the uniform weight initialisation interval.
pub const INIT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    input_dim: usize,
    num_classes: usize,
    hidden_dims: Vec<usize>,
}

impl ModelSpec {
    pub fn new(input_dim: usize, num_classes: usize, hidden_dims: Vec<usize>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::config("input_dim must be at least 1"));
        }
        if num_classes < 2 {
            return Err(Error::config(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        if hidden_dims.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        Ok(Self {
            input_dim,
            num_classes,
            hidden_dims,
        })
    }

    /// Softmax regression: a single affine layer.
    pub fn softmax_regression(input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::new(input_dim, num_classes, Vec::new())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn hidden_dims(&self) -> &[usize] {
        &self.hidden_dims
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.num_classes);
        dims
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|l| l.param_count()).sum()
    }

    pub(crate) fn layers(&self) -> impl Iterator<Item = LayerLayout> {
        let dims = self.dims();
        let mut offset = 0;
        (0..dims.len() - 1).map(move |l| {
            let layout = LayerLayout {
                index: l,
                inputs: dims[l],
                outputs: dims[l + 1],
                offset,
            };
            offset += layout.param_count();
            layout
        })
    }

    pub(crate) fn check_params(&self, len: usize) -> Result<()> {
        if len != self.param_count() {
            return Err(Error::config(format!(
                "parameter length {len} does not match model size {}",
                self.param_count()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerLayout {
    pub index: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl LayerLayout {
    pub fn param_count(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }

    pub fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.outputs * self.inputs
    }

    pub fn biases(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.outputs * self.inputs;
        start..start + self.outputs
    }
}

/// Model weights plus the number of server updates applied to them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector<T> {
    pub values: Vec<T>,
    pub version: u64,
}

impl<T: Scalar> ParameterVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values, version: 0 }
    }

    pub fn zeros(spec: &ModelSpec) -> Self {
        Self::new(vec![T::zero(); spec.param_count()])
    }

    /// Weights drawn from `U(-0.05, 0.05)`, biases zero.
    pub fn init(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = seed::rng_from(seed);
        let dist = Uniform::new(-INIT_SCALE, INIT_SCALE).expect("valid interval");
        let mut values = vec![T::zero(); spec.param_count()];
        for layer in spec.layers() {
            for w in &mut values[layer.weights()] {
                *w = T::from_f64_lossy(dist.sample(&mut rng));
            }
        }
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector<T> {
    pub values: Vec<T>,
    /// Number of samples the gradient was averaged over.
    pub sample_count: usize,
}

impl<T: Scalar> GradientVector<T> {
    pub fn new(values: Vec<T>, sample_count: usize) -> Self {
        Self {
            values,
            sample_count,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Borrowed minibatch: row-major features and one label per row.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a, T> {
    features: &'a [T],
    labels: &'a [usize],
    input_dim: usize,
}

impl<'a, T: Scalar> Batch<'a, T> {
    pub fn new(features: &'a [T], labels: &'a [usize], input_dim: usize) -> Result<Self> {
        if input_dim == 0 || features.len() != labels.len() * input_dim {
            return Err(Error::config(format!(
                "feature buffer of {} values does not hold {} rows of width {input_dim}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            input_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &'a [T] {
        self.features
    }

    pub fn labels(&self) -> &'a [usize] {
        self.labels
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn row(&self, i: usize) -> &'a [T] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub(crate) fn conform(&self, spec: &ModelSpec) -> Result<()> {
        if self.is_empty() {
            return Err(Error::data("batch is empty"));
        }
        if self.input_dim != spec.input_dim() {
            return Err(Error::config(format!(
                "batch width {} does not match model input_dim {}",
                self.input_dim,
                spec.input_dim()
            )));
        }
        check_labels(self.labels, spec.num_classes())
    }
}

pub(crate) fn check_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    match labels.iter().position(|&y| y >= num_classes) {
        Some(i) => Err(Error::data(format!(
            "label {} at row {i} outside [0, {num_classes})",
            labels[i]
        ))),
        None => Ok(()),
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::config("ragged matrix rows"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// One plain SGD step: `values - lr * grad`, version bumped by one.
pub fn sgd_apply<T: Scalar>(
    params: &ParameterVector<T>,
    grad: &GradientVector<T>,
    lr: T,
) -> Result<ParameterVector<T>> {
    if params.len() != grad.len() {
        return Err(Error::config(format!(
            "gradient length {} does not match parameter length {}",
            grad.len(),
            params.len()
        )));
    }
    if !(lr > T::zero()) {
        return Err(Error::config(format!("learning rate must be positive, got {lr}")));
    }
    let values: Vec<T> = params
        .values
        .iter()
        .zip(&grad.values)
        .map(|(&v, &g)| v - lr * g)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("sgd update"));
    }
    Ok(ParameterVector {
        values,
        version: params.version + 1,
    })
}
