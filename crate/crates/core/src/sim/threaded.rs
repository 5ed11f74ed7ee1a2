//! Wall-clock mode: one OS thread per worker around a mutex-guarded server.
//!
//! Virtual durations are multiplied by `time_scale` to get real sleeps.
//! Interleavings depend on the scheduler, so results vary between runs.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::model::{gradient, ModelSpec, ParameterVector};
use crate::scalar::Scalar;
use crate::server::{GradientMessage, ServerState};

use super::engine::{check_inputs, eval_grid, record, SimRun};
use super::metrics::MetricsSeries;
use super::{SimConfig, WorkerProfile};
use crate::seed::{self, tag};
use rand::Rng;

struct Shared<T> {
    server: ServerState<T>,
    /// Incremented each time a worker's buffered gradient is consumed.
    release_epoch: Vec<u64>,
    updates: u64,
    flushed: u64,
    stop: bool,
    error: Option<Error>,
}

fn sleep_virtual(seconds: f64, time_scale: f64) {
    let real = seconds * time_scale;
    if real > 0.0 {
        thread::sleep(Duration::from_secs_f64(real));
    }
}

pub fn run_threaded<T: Scalar>(
    config: &SimConfig,
    spec: &ModelSpec,
    split: &DatasetSplit<T>,
    profiles: &[WorkerProfile<T>],
    time_scale: f64,
) -> Result<SimRun> {
    check_inputs(config, spec, split, profiles)?;
    if !(time_scale > 0.0) {
        return Err(Error::config("time_scale must be positive"));
    }
    let params = ParameterVector::<T>::init(spec, config.init_seed());
    let server = ServerState::new(params, config.policy, T::from_f64_lossy(config.lr), config.worker_count)?;
    let state = Mutex::new(Shared {
        server,
        release_epoch: vec![0; config.worker_count],
        updates: 0,
        flushed: 0,
        stop: false,
        error: None,
    });
    let released = Condvar::new();

    let mut series = MetricsSeries::new(config.policy.name(), 0);
    {
        let s = state.lock().expect("fresh mutex");
        series
            .records
            .push(record(0.0, spec, s.server.params(), split, s.server.current_k())?);
    }

    let start = Instant::now();
    let eval_result: Result<()> = thread::scope(|scope| {
        for profile in profiles {
            let state = &state;
            let released = &released;
            scope.spawn(move || {
                let worker_seed = config.worker_seed(profile.worker_id);
                let mut batch_rng = seed::rng_from(seed::hash64(worker_seed, tag::MINIBATCH));
                let mut delay_rng = seed::rng_from(seed::hash64(worker_seed, tag::DELAY));
                let shard = &profile.shard;
                let mut features = Vec::new();
                let mut labels = Vec::new();
                loop {
                    let (params, version) = {
                        let s = state.lock().expect("server lock");
                        if s.stop {
                            return;
                        }
                        let snap = s.server.fetch_params();
                        (ParameterVector { values: snap.values, version: snap.version }, snap.version)
                    };
                    features.clear();
                    labels.clear();
                    for _ in 0..config.batch_size {
                        let i = batch_rng.random_range(0..shard.len());
                        features.extend_from_slice(shard.row(i));
                        labels.push(shard.labels()[i]);
                    }
                    let batch = crate::model::Batch::new(&features, &labels, shard.input_dim())
                        .expect("rows copied from shard");
                    let grad = gradient(spec, &params, &batch);
                    let mut duration = profile.base_compute_time;
                    if profile.delayed {
                        duration += super::sample_delay(&mut delay_rng, profile.delay_mean, profile.delay_std);
                    }
                    sleep_virtual(duration, time_scale);

                    let mut s = state.lock().expect("server lock");
                    if s.stop {
                        return;
                    }
                    let grad = match grad {
                        Ok(g) => g,
                        Err(e) => {
                            s.error.get_or_insert(e);
                            s.stop = true;
                            released.notify_all();
                            return;
                        }
                    };
                    let epoch = s.release_epoch[profile.worker_id];
                    let sent_at = start.elapsed().as_secs_f64() / time_scale;
                    let msg = GradientMessage { worker_id: profile.worker_id, grad, base_version: version, sent_at };
                    match s.server.submit_gradient(msg) {
                        Ok(outcome) if outcome.applied => {
                            s.updates += 1;
                            s.flushed += outcome.flushed_count as u64;
                            for w in outcome.released {
                                s.release_epoch[w] += 1;
                            }
                            released.notify_all();
                        }
                        Ok(_) => {
                            while !s.stop && s.release_epoch[profile.worker_id] == epoch {
                                s = released.wait(s).expect("server lock");
                            }
                        }
                        Err(e) => {
                            s.error.get_or_insert(e);
                            s.stop = true;
                            released.notify_all();
                            return;
                        }
                    }
                }
            });
        }

        let outcome = (|| {
            for t in eval_grid(config) {
                let due = start + Duration::from_secs_f64(t * time_scale);
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    thread::sleep(wait);
                }
                let (params, k) = {
                    let s = state.lock().expect("server lock");
                    if s.stop {
                        break;
                    }
                    (s.server.params().clone(), s.server.current_k())
                };
                series.records.push(record(t, spec, &params, split, k)?);
            }
            let due = start + Duration::from_secs_f64(config.time_budget * time_scale);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
            Ok(())
        })();
        let mut s = state.lock().expect("server lock");
        s.stop = true;
        released.notify_all();
        outcome
    });
    eval_result?;

    let mut s = state.into_inner().expect("workers joined");
    if let Some(e) = s.error.take() {
        return Err(e);
    }
    if let Some(outcome) = s.server.flush_pending()? {
        s.updates += 1;
        s.flushed += outcome.flushed_count as u64;
    }
    series.records.push(record(
        config.time_budget,
        spec,
        s.server.params(),
        split,
        s.server.current_k(),
    )?);
    Ok(SimRun {
        series,
        staleness_histogram: s.server.staleness_histogram().clone(),
        gradients_submitted: s.server.gradients_submitted(),
        gradients_flushed: s.flushed,
        updates_applied: s.updates,
    })
}
