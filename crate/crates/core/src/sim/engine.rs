use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::model::{evaluate, gradient, Batch, ModelSpec, ParameterVector};
use crate::scalar::Scalar;
use crate::seed::{self, tag};
use crate::server::{AggregationPolicy, GradientMessage, ServerState};

use super::delay::sample_delay;
use super::events::{EventKind, EventQueue};
use super::metrics::{MetricRecord, MetricsSeries};
use super::{SimConfig, WorkerProfile};

/// Result of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub series: MetricsSeries,
    /// Gradients received, keyed by staleness in versions.
    pub staleness_histogram: BTreeMap<u64, u64>,
    pub gradients_submitted: u64,
    /// Sum of `flushed_count` over all applied updates, final flush included.
    pub gradients_flushed: u64,
    pub updates_applied: u64,
}

struct Worker<'a, T> {
    profile: &'a WorkerProfile<T>,
    batch_rng: ChaCha8Rng,
    delay_rng: ChaCha8Rng,
    features: Vec<T>,
    labels: Vec<usize>,
    in_flight: Option<GradientMessage<T>>,
}

impl<'a, T: Scalar> Worker<'a, T> {
    fn new(profile: &'a WorkerProfile<T>, worker_seed: u64) -> Self {
        Self {
            profile,
            batch_rng: seed::rng_from(seed::hash64(worker_seed, tag::MINIBATCH)),
            delay_rng: seed::rng_from(seed::hash64(worker_seed, tag::DELAY)),
            features: Vec::new(),
            labels: Vec::new(),
            in_flight: None,
        }
    }

    /// Samples a minibatch with replacement from the shard.
    fn draw_batch(&mut self, batch_size: usize) -> Batch<'_, T> {
        let shard = &self.profile.shard;
        self.features.clear();
        self.labels.clear();
        for _ in 0..batch_size {
            let i = self.batch_rng.random_range(0..shard.len());
            self.features.extend_from_slice(shard.row(i));
            self.labels.push(shard.labels()[i]);
        }
        Batch::new(&self.features, &self.labels, shard.input_dim()).expect("rows copied from shard")
    }

    fn gradient_duration(&mut self) -> f64 {
        let extra = if self.profile.delayed {
            sample_delay(&mut self.delay_rng, self.profile.delay_mean, self.profile.delay_std)
        } else {
            0.0
        };
        self.profile.base_compute_time + extra
    }
}

pub(crate) fn check_inputs<T: Scalar>(
    config: &SimConfig,
    spec: &ModelSpec,
    split: &DatasetSplit<T>,
    profiles: &[WorkerProfile<T>],
) -> Result<()> {
    config.validate()?;
    if profiles.len() != config.worker_count {
        return Err(Error::config(format!(
            "{} worker profiles for {} workers",
            profiles.len(),
            config.worker_count
        )));
    }
    for (i, p) in profiles.iter().enumerate() {
        if p.worker_id != i {
            return Err(Error::config(format!("profile {i} carries worker id {}", p.worker_id)));
        }
        p.validate()?;
        if p.shard.input_dim() != spec.input_dim() || p.shard.num_classes() > spec.num_classes() {
            return Err(Error::config(format!("shard {i} does not match the model shape")));
        }
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::config("train and test splits must be non-empty"));
    }
    Ok(())
}

pub(crate) fn record<T: Scalar>(
    time: f64,
    spec: &ModelSpec,
    params: &ParameterVector<T>,
    split: &DatasetSplit<T>,
    current_k: usize,
) -> Result<MetricRecord> {
    let train = evaluate(spec, params, &split.train.as_batch())?;
    let test = evaluate(spec, params, &split.test.as_batch())?;
    Ok(MetricRecord {
        time,
        train_loss: train.loss,
        test_loss: test.loss,
        test_accuracy: test.accuracy,
        update_count: params.version,
        current_k,
    })
}

/// Evaluation times strictly inside the budget; the budget itself is
/// recorded separately after the final flush.
pub(crate) fn eval_grid(config: &SimConfig) -> Vec<f64> {
    let eps = config.time_budget * 1e-12;
    (1..)
        .map(|k| k as f64 * config.eval_interval)
        .take_while(|&t| t < config.time_budget - eps)
        .collect()
}

/// Runs one policy to the time budget on the virtual clock.
///
/// Every worker loops: fetch parameters, sample a minibatch from its shard,
/// compute the gradient, and deliver it after `base_compute_time` plus an
/// optional clamped-normal delay. A worker whose gradient is buffered waits
/// until the flush that consumes it. Evaluations run every `eval_interval`;
/// at the budget the buffer is force-flushed and a last record is taken.
pub fn run_simulation<T: Scalar>(
    config: &SimConfig,
    spec: &ModelSpec,
    split: &DatasetSplit<T>,
    profiles: &[WorkerProfile<T>],
) -> Result<SimRun> {
    check_inputs(config, spec, split, profiles)?;

    let params = ParameterVector::<T>::init(spec, config.init_seed());
    let mut server = ServerState::new(
        params,
        config.policy,
        T::from_f64_lossy(config.lr),
        config.worker_count,
    )?;
    let mut workers: Vec<Worker<'_, T>> = profiles
        .iter()
        .map(|p| Worker::new(p, config.worker_seed(p.worker_id)))
        .collect();

    let mut series = MetricsSeries::new(config.policy.name(), 0);
    series
        .records
        .push(record(0.0, spec, server.params(), split, server.current_k())?);

    let mut queue = EventQueue::new();
    for t in eval_grid(config) {
        queue.push(t, EventKind::Evaluation);
    }
    for w in 0..config.worker_count {
        queue.push(0.0, EventKind::WorkerReady(w));
    }

    let mut updates = 0u64;
    let mut flushed = 0u64;
    while let Some(event) = queue.pop() {
        if event.time > config.time_budget {
            break;
        }
        let now = event.time;
        let result: Result<()> = (|| {
            match event.kind {
                EventKind::WorkerReady(w) => {
                    let worker = &mut workers[w];
                    let batch_size = config.batch_size;
                    let base_version = server.update_count();
                    let grad = {
                        let batch = worker.draw_batch(batch_size);
                        gradient(spec, server.params(), &batch)?
                    };
                    let arrive = now + worker.gradient_duration();
                    worker.in_flight = Some(GradientMessage {
                        worker_id: w,
                        grad,
                        base_version,
                        sent_at: arrive,
                    });
                    queue.push(arrive, EventKind::GradientArrival(w));
                }
                EventKind::GradientArrival(w) => {
                    let msg = workers[w]
                        .in_flight
                        .take()
                        .ok_or_else(|| Error::Internal(format!("worker {w} has nothing in flight")))?;
                    let outcome = server.submit_gradient(msg)?;
                    if outcome.applied {
                        updates += 1;
                        flushed += outcome.flushed_count as u64;
                        for released in outcome.released {
                            queue.push(now, EventKind::WorkerReady(released));
                        }
                    }
                }
                EventKind::Evaluation => {
                    series
                        .records
                        .push(record(now, spec, server.params(), split, server.current_k())?);
                }
            }
            Ok(())
        })();
        result.map_err(|e| e.at(format!("virtual time {now:.6} s")))?;
    }

    let end = config.time_budget;
    let finish: Result<()> = (|| {
        if let Some(outcome) = server.flush_pending()? {
            updates += 1;
            flushed += outcome.flushed_count as u64;
        }
        series
            .records
            .push(record(end, spec, server.params(), split, server.current_k())?);
        Ok(())
    })();
    finish.map_err(|e| e.at(format!("virtual time {end:.6} s")))?;

    Ok(SimRun {
        series,
        staleness_histogram: server.staleness_histogram().clone(),
        gradients_submitted: server.gradients_submitted(),
        gradients_flushed: flushed,
        updates_applied: updates,
    })
}

/// One run per labelled policy, all sharing seeds, initial weights, shards
/// and worker profiles. Runs are independent and execute in parallel.
pub fn run_comparison<T: Scalar>(
    base: &SimConfig,
    policies: &[(String, AggregationPolicy)],
    spec: &ModelSpec,
    split: &DatasetSplit<T>,
    profiles: &[WorkerProfile<T>],
) -> Result<Vec<SimRun>> {
    if policies.len() < 2 {
        return Err(Error::config("a comparison needs at least two policies"));
    }
    policies
        .par_iter()
        .map(|(label, policy)| {
            let config = SimConfig {
                policy: *policy,
                ..base.clone()
            };
            let mut run =
                run_simulation(&config, spec, split, profiles).map_err(|e| e.at(format!("policy {label}")))?;
            run.series.policy = label.clone();
            Ok(run)
        })
        .collect()
}
