//! Datasets: seeded Gaussian-mixture generation, IDX loading, train/test
//! splitting and round-robin sharding across workers.

mod idx;
mod synthetic;

pub use idx::{load_idx, load_idx_images, load_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use synthetic::{gen_synthetic, SyntheticParams};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::{check_labels, Batch};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    labels: Vec<usize>,
    input_dim: usize,
    num_classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Vec<T>,
        labels: Vec<usize>,
        input_dim: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if input_dim == 0 || features.len() != labels.len() * input_dim {
            return Err(Error::data(format!(
                "{} feature values cannot form {} rows of width {input_dim}",
                features.len(),
                labels.len()
            )));
        }
        check_labels(&labels, num_classes)?;
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite feature in row {}",
                i / input_dim
            )));
        }
        Ok(Self {
            features,
            labels,
            input_dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    /// The whole dataset as one batch.
    pub fn as_batch(&self) -> Batch<'_, T> {
        Batch::new(&self.features, &self.labels, self.input_dim)
            .expect("dataset shape is validated at construction")
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut features = Vec::with_capacity(rows.len() * self.input_dim);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Self {
            features,
            labels,
            input_dim: self.input_dim,
            num_classes: self.num_classes,
        }
    }

    /// Seeded random subset of at most `n` rows.
    pub fn subsample(&self, n: usize, seed: u64) -> Self {
        if n >= self.len() {
            return self.clone();
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut seed::rng_from(seed));
        order.truncate(n);
        self.select(&order)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
}

/// Seeded permutation; the first `floor(train_fraction * n)` rows train.
pub fn split<T: Scalar>(
    dataset: &Dataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.len();
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::config(format!(
            "train fraction {train_fraction} of {n} rows leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng_from(seed));
    Ok(DatasetSplit {
        train: dataset.select(&order[..n_train]),
        test: dataset.select(&order[n_train..]),
    })
}

/// Row `i` goes to shard `i mod worker_count`.
pub fn shard<T: Scalar>(train: &Dataset<T>, worker_count: usize) -> Result<Vec<Dataset<T>>> {
    if worker_count == 0 || worker_count > train.len() {
        return Err(Error::config(format!(
            "cannot shard {} rows across {worker_count} workers",
            train.len()
        )));
    }
    Ok((0..worker_count)
        .map(|w| {
            let rows: Vec<usize> = (w..train.len()).step_by(worker_count).collect();
            train.select(&rows)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows_of(d: &Dataset<f64>) -> Vec<(Vec<u64>, usize)> {
        let mut rows: Vec<_> = (0..d.len())
            .map(|i| (d.row(i).iter().map(|v| v.to_bits()).collect(), d.labels()[i]))
            .collect();
        rows.sort();
        rows
    }

    fn small(n: usize) -> Dataset<f64> {
        let features: Vec<f64> = (0..n * 2).map(|i| i as f64 * 0.5).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        Dataset::new(features, labels, 2, 3).unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![0.0_f64; 3], vec![0, 1], 2, 2).is_err());
        assert!(Dataset::new(vec![0.0_f64; 4], vec![0, 2], 2, 2).is_err());
        assert!(Dataset::new(vec![f64::NAN, 0.0], vec![0], 2, 2).is_err());
    }

    #[test]
    fn split_sizes_and_multiset() {
        let d = small(10_000);
        let s = split(&d, 0.8, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8000, 2000));
        let mut union = s.train.clone();
        union.features.extend_from_slice(s.test.features());
        union.labels.extend_from_slice(s.test.labels());
        assert_eq!(rows_of(&union), rows_of(&d));
        assert_eq!(s, split(&d, 0.8, 3).unwrap());
        assert_ne!(s, split(&d, 0.8, 4).unwrap());
    }

    #[test]
    fn split_rejects_empty_sides() {
        let d = small(3);
        assert!(split(&d, 0.0, 1).unwrap_err().is_config());
        assert!(split(&d, 1.0, 1).unwrap_err().is_config());
        assert!(split(&d, 0.2, 1).unwrap_err().is_config());
    }

    #[test]
    fn shard_even_partition() {
        let d = small(8000);
        let shards = shard(&d, 25).unwrap();
        assert!(shards.iter().all(|s| s.len() == 320));
        let single = shard(&d, 1).unwrap();
        assert_eq!(single[0], d);
        assert!(shard(&small(3), 4).unwrap_err().is_config());
    }

    #[test]
    fn subsample_is_seeded() {
        let d = small(100);
        assert_eq!(d.subsample(10, 1), d.subsample(10, 1));
        assert_eq!(d.subsample(10, 1).len(), 10);
        assert_eq!(d.subsample(1000, 1), d);
    }
}
