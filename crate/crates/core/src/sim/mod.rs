//! Worker/server simulation.
//!
//! The primary mode is a single-threaded discrete-event engine on a virtual
//! clock: every run is a pure function of its configuration and seed. A
//! real-thread mode with wall-clock sleeps is provided for sanity checks; it
//! makes no determinism promise.
//!
//! Randomness is split per worker: worker `w` of a run seeded `s` draws
//! minibatches from `hash64(hash64(s, w), 1)` and delays from
//! `hash64(hash64(s, w), 2)`. Initial weights come from `hash64(s, 2^40)`.

mod delay;
mod engine;
mod events;
mod metrics;
mod threaded;

pub use delay::sample_delay;
pub use engine::{run_comparison, run_simulation, SimRun};
pub use events::{Event, EventKind, EventQueue};
pub use metrics::{MetricRecord, MetricsSeries};
pub use threaded::run_threaded;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;
use crate::server::AggregationPolicy;

/// Virtual seconds of compute per training sample in a gradient.
pub const DEFAULT_COMPUTE_PER_SAMPLE: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub worker_count: usize,
    /// Virtual seconds.
    pub time_budget: f64,
    pub eval_interval: f64,
    pub rng_seed: u64,
    pub policy: AggregationPolicy,
    pub lr: f64,
    pub batch_size: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.worker_count == 0 {
            return Err(Error::config("worker_count must be at least 1"));
        }
        if !(self.time_budget > 0.0) || !self.time_budget.is_finite() {
            return Err(Error::config("time_budget must be a positive number of seconds"));
        }
        if !(self.eval_interval > 0.0) || self.eval_interval > self.time_budget {
            return Err(Error::config(format!(
                "eval_interval must lie in (0, time_budget], got {}",
                self.eval_interval
            )));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::config("lr must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn worker_seed(&self, worker_id: usize) -> u64 {
        seed::hash64(self.rng_seed, worker_id as u64)
    }

    pub(crate) fn init_seed(&self) -> u64 {
        seed::hash64(self.rng_seed, seed::tag::INIT)
    }
}

/// How long gradients take and which workers suffer random extra delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayModel {
    pub compute_per_sample: f64,
    /// Fraction of workers, counted from worker 0 and rounded up, that are delayed.
    pub delayed_fraction: f64,
    pub delay_mean: f64,
    pub delay_std: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        Self {
            compute_per_sample: DEFAULT_COMPUTE_PER_SAMPLE,
            delayed_fraction: 0.5,
            delay_mean: 0.0,
            delay_std: 0.25,
        }
    }
}

impl DelayModel {
    pub fn delayed_count(&self, worker_count: usize) -> usize {
        ((worker_count as f64 * self.delayed_fraction).ceil() as usize).min(worker_count)
    }
}

#[derive(Debug, Clone)]
pub struct WorkerProfile<T> {
    pub worker_id: usize,
    pub shard: Arc<Dataset<T>>,
    /// Virtual seconds per gradient before any random delay.
    pub base_compute_time: f64,
    pub delayed: bool,
    pub delay_mean: f64,
    pub delay_std: f64,
}

impl<T: Scalar> WorkerProfile<T> {
    pub fn validate(&self) -> Result<()> {
        if self.shard.is_empty() {
            return Err(Error::config(format!("worker {} has an empty shard", self.worker_id)));
        }
        if !(self.base_compute_time > 0.0) || !self.base_compute_time.is_finite() {
            return Err(Error::config(format!(
                "worker {} needs a positive compute time",
                self.worker_id
            )));
        }
        if !(self.delay_std >= 0.0) || !self.delay_mean.is_finite() {
            return Err(Error::config(format!(
                "worker {} has an invalid delay distribution",
                self.worker_id
            )));
        }
        Ok(())
    }
}

/// One profile per shard. Compute time is `compute_per_sample * batch_size`;
/// workers `0..ceil(W * delayed_fraction)` are delayed.
pub fn build_profiles<T: Scalar>(
    shards: Vec<Dataset<T>>,
    batch_size: usize,
    delays: &DelayModel,
) -> Vec<WorkerProfile<T>> {
    let delayed = delays.delayed_count(shards.len());
    shards
        .into_iter()
        .enumerate()
        .map(|(worker_id, shard)| WorkerProfile {
            worker_id,
            shard: Arc::new(shard),
            base_compute_time: delays.compute_per_sample * batch_size as f64,
            delayed: worker_id < delayed,
            delay_mean: delays.delay_mean,
            delay_std: delays.delay_std,
        })
        .collect()
}
