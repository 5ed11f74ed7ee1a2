use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticParams {
    pub n_samples: usize,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Class means are drawn from `U(-class_sep, class_sep)` per dimension.
    pub class_sep: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            input_dim: 20,
            num_classes: 10,
            class_sep: 2.0,
        }
    }
}

/// Gaussian mixture with one unit-variance isotropic component per class.
///
/// Row `i` belongs to class `i mod num_classes`. Features are standardized
/// per dimension (population moments) after sampling.
pub fn gen_synthetic<T: Scalar>(params: &SyntheticParams, seed: u64) -> Result<Dataset<T>> {
    let SyntheticParams {
        n_samples,
        input_dim,
        num_classes,
        class_sep,
    } = *params;
    if num_classes < 2 || input_dim == 0 || n_samples < num_classes {
        return Err(Error::config(format!(
            "synthetic data needs num_classes >= 2, input_dim >= 1 and n_samples >= num_classes \
             (got {n_samples} x {input_dim}, {num_classes} classes)"
        )));
    }
    if !(class_sep >= 0.0) || !class_sep.is_finite() {
        return Err(Error::config(format!("class_sep must be finite and >= 0, got {class_sep}")));
    }

    let mut rng = seed::rng_from(seed);
    let means: Vec<f64> = if class_sep > 0.0 {
        let dist = Uniform::new(-class_sep, class_sep).expect("valid interval");
        (0..num_classes * input_dim).map(|_| dist.sample(&mut rng)).collect()
    } else {
        vec![0.0; num_classes * input_dim]
    };

    let labels: Vec<usize> = (0..n_samples).map(|i| i % num_classes).collect();
    let mut x = vec![0.0_f64; n_samples * input_dim];
    for (i, row) in x.chunks_exact_mut(input_dim).enumerate() {
        let mu = &means[labels[i] * input_dim..(labels[i] + 1) * input_dim];
        for (v, &m) in row.iter_mut().zip(mu) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = m + z;
        }
    }

    let n = n_samples as f64;
    for d in 0..input_dim {
        let mean = x.iter().skip(d).step_by(input_dim).sum::<f64>() / n;
        let var = x
            .iter()
            .skip(d)
            .step_by(input_dim)
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        for v in x.iter_mut().skip(d).step_by(input_dim) {
            *v -= mean;
            if sd > 0.0 {
                *v /= sd;
            }
        }
    }

    Dataset::new(
        x.into_iter().map(T::from_f64_lossy).collect(),
        labels,
        input_dim,
        num_classes,
    )
}
