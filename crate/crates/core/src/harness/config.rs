//! Experiment configuration file.
//!
//! A single flat JSON object. Every key is optional and unknown keys are
//! rejected. Keys and defaults:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `seed` | 0 | master seed |
//! | `dataset` | `"synthetic"` | `"synthetic"` or `"idx"` |
//! | `n_samples`, `input_dim`, `num_classes`, `class_sep` | 10000, 20, 10, 2.0 | synthetic generator |
//! | `train_fraction` | 0.8 | synthetic train/test split |
//! | `resample_dataset` | false | draw a fresh synthetic dataset per sweep value |
//! | `idx_train_images`, `idx_train_labels`, `idx_test_images`, `idx_test_labels` | none | IDX file paths |
//! | `idx_train_subsample`, `idx_test_subsample` | 4000, 1000 | rows kept from the IDX sets |
//! | `hidden_dims` | `[]` | tanh hidden layer widths; empty is softmax regression |
//! | `worker_count` | 25 | |
//! | `time_budget` | 100.0 | virtual seconds |
//! | `eval_interval` | `time_budget / 50` | virtual seconds |
//! | `lr` | 0.01 | |
//! | `batch_size` | 32 | |
//! | `step_size` | 500 | hybrid threshold step, in server updates |
//! | `k_initial` | 1 | hybrid starting threshold |
//! | `compute_per_sample` | 0.001 | virtual seconds per sample in a gradient |
//! | `delayed_fraction` | 0.5 | share of workers with random extra delay |
//! | `delay_mean`, `delay_std` | 0.0, 0.25 | extra delay `max(0, Normal(mean, std))` |
//! | `policies` | `["sync", "async", "hybrid"]` | see [`PolicySpec`] |
//! | `rounds` | 5 | |
//! | `sweep_axis` | none | `batch_size`, `step_size`, `step_lr_multiple` or `delay_std` |
//! | `sweep_values` | `[]` | values for the swept axis |
//! | `output_dir` | `"out"` | |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::SyntheticParams;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::seed;
use crate::server::AggregationPolicy;
use crate::sim::{DelayModel, SimConfig};

use super::policy::PolicySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Synthetic,
    Idx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    BatchSize,
    /// Absolute threshold step, in server updates.
    StepSize,
    /// Threshold step as a multiple of `1 / lr`.
    StepLrMultiple,
    DelayStd,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::BatchSize => "batch_size",
            SweepAxis::StepSize => "step_size",
            SweepAxis::StepLrMultiple => "step_lr_multiple",
            SweepAxis::DelayStd => "delay_std",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,

    pub dataset: DatasetKind,
    pub n_samples: usize,
    pub input_dim: usize,
    pub num_classes: usize,
    pub class_sep: f64,
    pub train_fraction: f64,
    pub resample_dataset: bool,
    pub idx_train_images: Option<PathBuf>,
    pub idx_train_labels: Option<PathBuf>,
    pub idx_test_images: Option<PathBuf>,
    pub idx_test_labels: Option<PathBuf>,
    pub idx_train_subsample: usize,
    pub idx_test_subsample: usize,

    pub hidden_dims: Vec<usize>,

    pub worker_count: usize,
    pub time_budget: f64,
    pub eval_interval: Option<f64>,
    pub lr: f64,
    pub batch_size: usize,
    pub step_size: u64,
    pub k_initial: usize,
    pub compute_per_sample: f64,
    pub delayed_fraction: f64,
    pub delay_mean: f64,
    pub delay_std: f64,

    pub policies: Vec<String>,
    pub rounds: usize,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<f64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let synth = SyntheticParams::default();
        let delays = DelayModel::default();
        Self {
            seed: 0,
            dataset: DatasetKind::Synthetic,
            n_samples: synth.n_samples,
            input_dim: synth.input_dim,
            num_classes: synth.num_classes,
            class_sep: synth.class_sep,
            train_fraction: 0.8,
            resample_dataset: false,
            idx_train_images: None,
            idx_train_labels: None,
            idx_test_images: None,
            idx_test_labels: None,
            idx_train_subsample: 4000,
            idx_test_subsample: 1000,
            hidden_dims: Vec::new(),
            worker_count: 25,
            time_budget: 100.0,
            eval_interval: None,
            lr: 0.01,
            batch_size: 32,
            step_size: 500,
            k_initial: 1,
            compute_per_sample: delays.compute_per_sample,
            delayed_fraction: delays.delayed_fraction,
            delay_mean: delays.delay_mean,
            delay_std: delays.delay_std,
            policies: vec!["sync".into(), "async".into(), "hybrid".into()],
            rounds: 5,
            sweep_axis: None,
            sweep_values: Vec::new(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON encoding, with
    /// `output_dir` left out.
    pub fn fingerprint(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        let json = value.to_string();
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds must be at least 1"));
        }
        self.model_spec_shape_check()?;
        self.sim_config(0, AggregationPolicy::Asynchronous).validate()?;
        self.delay_model_check()?;
        let specs = self.policy_specs()?;
        if specs.is_empty() {
            return Err(Error::config("at least one policy is required"));
        }
        for (i, a) in self.policies.iter().enumerate() {
            if self.policies[..i].contains(a) {
                return Err(Error::config(format!("policy '{a}' listed twice")));
            }
        }
        for spec in &specs {
            spec.resolve(self.step_size, self.k_initial, self.worker_count)?;
        }
        if self.dataset == DatasetKind::Idx {
            for (key, path) in [
                ("idx_train_images", &self.idx_train_images),
                ("idx_train_labels", &self.idx_train_labels),
                ("idx_test_images", &self.idx_test_images),
                ("idx_test_labels", &self.idx_test_labels),
            ] {
                match path {
                    None => return Err(Error::config(format!("{key} is required for idx datasets"))),
                    Some(p) if !p.exists() => {
                        return Err(Error::config(format!("{key}: {} does not exist", p.display())))
                    }
                    Some(_) => {}
                }
            }
        } else if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train_fraction must lie in (0, 1)"));
        }
        match self.sweep_axis {
            Some(axis) => {
                if self.sweep_values.is_empty() {
                    return Err(Error::config("sweep_axis needs at least one sweep value"));
                }
                for &v in &self.sweep_values {
                    self.with_swept(axis, v)?;
                }
            }
            None if !self.sweep_values.is_empty() => {
                return Err(Error::config("sweep_values given without sweep_axis"));
            }
            None => {}
        }
        Ok(())
    }

    fn model_spec_shape_check(&self) -> Result<()> {
        if self.dataset == DatasetKind::Synthetic {
            ModelSpec::new(self.input_dim, self.num_classes, self.hidden_dims.clone())?;
            if self.n_samples < self.num_classes {
                return Err(Error::config("n_samples must be at least num_classes"));
            }
            if !(self.class_sep >= 0.0) {
                return Err(Error::config("class_sep must be non-negative"));
            }
        } else if self.hidden_dims.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        Ok(())
    }

    fn delay_model_check(&self) -> Result<()> {
        if !(self.compute_per_sample > 0.0) {
            return Err(Error::config("compute_per_sample must be positive"));
        }
        if !(0.0..=1.0).contains(&self.delayed_fraction) {
            return Err(Error::config("delayed_fraction must lie in [0, 1]"));
        }
        if !(self.delay_std >= 0.0) || !self.delay_std.is_finite() || !self.delay_mean.is_finite() {
            return Err(Error::config("delay_std must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn policy_specs(&self) -> Result<Vec<PolicySpec>> {
        self.policies.iter().map(|p| p.parse()).collect()
    }

    /// Labelled aggregation policies in config order.
    pub fn resolved_policies(&self) -> Result<Vec<(String, AggregationPolicy)>> {
        self.policies
            .iter()
            .map(|label| {
                let spec: PolicySpec = label.parse()?;
                Ok((label.clone(), spec.resolve(self.step_size, self.k_initial, self.worker_count)?))
            })
            .collect()
    }

    pub fn synthetic_params(&self) -> SyntheticParams {
        SyntheticParams {
            n_samples: self.n_samples,
            input_dim: self.input_dim,
            num_classes: self.num_classes,
            class_sep: self.class_sep,
        }
    }

    pub fn delay_model(&self) -> DelayModel {
        DelayModel {
            compute_per_sample: self.compute_per_sample,
            delayed_fraction: self.delayed_fraction,
            delay_mean: self.delay_mean,
            delay_std: self.delay_std,
        }
    }

    pub fn eval_interval(&self) -> f64 {
        self.eval_interval.unwrap_or(self.time_budget / 50.0)
    }

    pub fn round_seed(&self, round: usize) -> u64 {
        seed::hash64(self.seed, round as u64)
    }

    pub fn sim_config(&self, round: usize, policy: AggregationPolicy) -> SimConfig {
        SimConfig {
            worker_count: self.worker_count,
            time_budget: self.time_budget,
            eval_interval: self.eval_interval(),
            rng_seed: self.round_seed(round),
            policy,
            lr: self.lr,
            batch_size: self.batch_size,
        }
    }

    /// Copy with one axis set to `value`; the sweep itself is cleared.
    pub fn with_swept(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let positive_int = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::config(format!("{} needs a positive integer, got {v}", axis.name())))
            }
        };
        let mut cell = self.clone();
        cell.sweep_axis = None;
        cell.sweep_values = Vec::new();
        match axis {
            SweepAxis::BatchSize => cell.batch_size = positive_int(value)?,
            SweepAxis::StepSize => cell.step_size = positive_int(value)? as u64,
            SweepAxis::StepLrMultiple => {
                let steps = (value / self.lr).round();
                if !(value > 0.0) || steps < 1.0 {
                    return Err(Error::config(format!("step multiple {value} is not positive")));
                }
                cell.step_size = steps as u64;
            }
            SweepAxis::DelayStd => {
                if !(value >= 0.0) || !value.is_finite() {
                    return Err(Error::config(format!("delay_std must be non-negative, got {value}")));
                }
                cell.delay_std = value;
            }
        }
        Ok(cell)
    }
}
