//! Parameter server: versioned parameters, the gradient buffer and the
//! three aggregation policies.
//!
//! The state machine is serial. Every submission is handled to completion
//! before the next one; concurrent callers must wrap the state in a lock.
//! A worker whose gradient sits in the buffer is expected to block until the
//! buffer is flushed, so a worker never has two buffered gradients.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sgd_apply, GradientVector, ParameterVector};
use crate::scalar::Scalar;
use crate::threshold::{should_flush, ThresholdSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "tag")]
pub enum AggregationPolicy {
    Synchronous,
    Asynchronous,
    Hybrid { schedule: ThresholdSchedule },
}

impl AggregationPolicy {
    pub fn hybrid(schedule: ThresholdSchedule) -> Self {
        AggregationPolicy::Hybrid { schedule }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AggregationPolicy::Synchronous => "sync",
            AggregationPolicy::Asynchronous => "async",
            AggregationPolicy::Hybrid { .. } => "hybrid",
        }
    }

    /// Flush threshold in effect after `update_count` applied updates.
    pub fn threshold(&self, update_count: u64, worker_count: usize) -> usize {
        match self {
            AggregationPolicy::Synchronous => worker_count,
            AggregationPolicy::Asynchronous => 1,
            AggregationPolicy::Hybrid { schedule } => schedule.threshold_at(update_count),
        }
    }
}

impl fmt::Display for AggregationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregationPolicy::Hybrid { schedule } => write!(
                f,
                "hybrid(step={}, k={}..{})",
                schedule.step_size(),
                schedule.k_initial(),
                schedule.k_max()
            ),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientMessage<T> {
    pub worker_id: usize,
    pub grad: GradientVector<T>,
    /// Parameter version the worker computed against.
    pub base_version: u64,
    /// Virtual send time in seconds.
    pub sent_at: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub applied: bool,
    pub new_version: u64,
    /// Gradients consumed by this update, 0 when the submission was buffered.
    pub flushed_count: usize,
    /// Threshold that governed the flush decision.
    pub current_k: usize,
    /// Workers whose gradients were consumed, in buffer order.
    pub released: Vec<usize>,
}

/// Immutable copy of the parameters handed to a worker.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSnapshot<T> {
    pub values: Vec<T>,
    pub version: u64,
}

/// Elementwise mean of the buffered gradients, summed in buffer order.
pub fn aggregate<T: Scalar>(buffer: &[GradientMessage<T>]) -> Result<GradientVector<T>> {
    let (first, rest) = buffer
        .split_first()
        .ok_or_else(|| Error::Internal("aggregate called on an empty buffer".into()))?;
    let mut sum = first.grad.values.clone();
    let mut samples = first.grad.sample_count;
    for msg in rest {
        if msg.grad.len() != sum.len() {
            return Err(Error::config("buffered gradients differ in length"));
        }
        for (s, &g) in sum.iter_mut().zip(&msg.grad.values) {
            *s += g;
        }
        samples += msg.grad.sample_count;
    }
    if buffer.len() > 1 {
        let n = T::from_usize_lossy(buffer.len());
        sum.iter_mut().for_each(|s| *s /= n);
    }
    if sum.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("gradient aggregate"));
    }
    Ok(GradientVector::new(sum, samples))
}

#[derive(Debug, Clone)]
pub struct ServerState<T> {
    params: ParameterVector<T>,
    buffer: Vec<GradientMessage<T>>,
    policy: AggregationPolicy,
    lr: T,
    worker_count: usize,
    staleness: BTreeMap<u64, u64>,
    submitted: u64,
    flushed: u64,
}

impl<T: Scalar> ServerState<T> {
    pub fn new(
        params: ParameterVector<T>,
        policy: AggregationPolicy,
        lr: T,
        worker_count: usize,
    ) -> Result<Self> {
        if worker_count == 0 {
            return Err(Error::config("worker count must be at least 1"));
        }
        if !(lr > T::zero()) || !lr.is_finite() {
            return Err(Error::config(format!("learning rate must be positive, got {lr}")));
        }
        if let AggregationPolicy::Hybrid { schedule } = &policy {
            if schedule.k_max() > worker_count {
                return Err(Error::config(format!(
                    "threshold cap {} exceeds worker count {worker_count}; the buffer could never flush",
                    schedule.k_max()
                )));
            }
        }
        if !params.is_finite() {
            return Err(Error::numeric("initial parameters"));
        }
        Ok(Self {
            params,
            buffer: Vec::with_capacity(worker_count),
            policy,
            lr,
            worker_count,
            staleness: BTreeMap::new(),
            submitted: 0,
            flushed: 0,
        })
    }

    pub fn policy(&self) -> &AggregationPolicy {
        &self.policy
    }

    pub fn params(&self) -> &ParameterVector<T> {
        &self.params
    }

    pub fn update_count(&self) -> u64 {
        self.params.version
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn worker_count(&self) -> usize {
        self.worker_count
    }

    pub fn current_k(&self) -> usize {
        self.policy.threshold(self.update_count(), self.worker_count)
    }

    /// Count of received gradients by staleness (versions behind at receipt).
    pub fn staleness_histogram(&self) -> &BTreeMap<u64, u64> {
        &self.staleness
    }

    pub fn gradients_submitted(&self) -> u64 {
        self.submitted
    }

    pub fn gradients_flushed(&self) -> u64 {
        self.flushed
    }

    pub fn fetch_params(&self) -> ParamSnapshot<T> {
        ParamSnapshot {
            values: self.params.values.clone(),
            version: self.params.version,
        }
    }

    pub fn submit_gradient(&mut self, msg: GradientMessage<T>) -> Result<UpdateOutcome> {
        if msg.worker_id >= self.worker_count {
            return Err(Error::config(format!(
                "worker id {} outside [0, {})",
                msg.worker_id, self.worker_count
            )));
        }
        if msg.grad.len() != self.params.len() {
            return Err(Error::config(format!(
                "gradient length {} does not match parameter length {}",
                msg.grad.len(),
                self.params.len()
            )));
        }
        if msg.base_version > self.params.version {
            return Err(Error::Internal(format!(
                "worker {} claims version {} but the server is at {}",
                msg.worker_id, msg.base_version, self.params.version
            )));
        }
        if self.buffer.iter().any(|m| m.worker_id == msg.worker_id) {
            return Err(Error::config(format!(
                "worker {} already has a gradient waiting in the buffer",
                msg.worker_id
            )));
        }

        *self
            .staleness
            .entry(self.params.version - msg.base_version)
            .or_insert(0) += 1;
        self.submitted += 1;

        let k = self.current_k();
        self.buffer.push(msg);
        if should_flush(self.buffer.len(), k) {
            self.flush(k)
        } else {
            Ok(UpdateOutcome {
                applied: false,
                new_version: self.params.version,
                flushed_count: 0,
                current_k: k,
                released: Vec::new(),
            })
        }
    }

    /// Applies whatever is buffered regardless of the threshold. Used once
    /// when the time budget runs out.
    pub fn flush_pending(&mut self) -> Result<Option<UpdateOutcome>> {
        if self.buffer.is_empty() {
            return Ok(None);
        }
        let k = self.current_k();
        self.flush(k).map(Some)
    }

    fn flush(&mut self, k: usize) -> Result<UpdateOutcome> {
        let grad = aggregate(&self.buffer)?;
        self.params = sgd_apply(&self.params, &grad, self.lr)?;
        let released: Vec<usize> = self.buffer.drain(..).map(|m| m.worker_id).collect();
        self.flushed += released.len() as u64;
        Ok(UpdateOutcome {
            applied: true,
            new_version: self.params.version,
            flushed_count: released.len(),
            current_k: k,
            released,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(worker_id: usize, values: Vec<f64>, base_version: u64) -> GradientMessage<f64> {
        GradientMessage {
            worker_id,
            grad: GradientVector::new(values, 1),
            base_version,
            sent_at: 0.0,
        }
    }

    fn server(policy: AggregationPolicy, w: usize) -> ServerState<f64> {
        ServerState::new(ParameterVector::new(vec![1.0, 2.0]), policy, 0.01, w).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let one = aggregate(&[msg(0, vec![0.3, -7.0], 0)]).unwrap();
        assert_eq!(one.values, vec![0.3, -7.0]);
        let two = aggregate(&[msg(0, vec![1.0, 3.0], 0), msg(1, vec![3.0, 1.0], 0)]).unwrap();
        assert_eq!(two.values, vec![2.0, 2.0]);
        assert_eq!(two.sample_count, 2);
        let copies: Vec<_> = (0..7).map(|w| msg(w, vec![0.125, -0.5], 0)).collect();
        assert_eq!(aggregate(&copies).unwrap().values, vec![0.125, -0.5]);
        assert!(matches!(aggregate::<f64>(&[]), Err(Error::Internal(_))));
    }

    #[test]
    fn hybrid_k1_applies_immediately() {
        let mut s = server(AggregationPolicy::hybrid(ThresholdSchedule::constant(1).unwrap()), 4);
        let out = s.submit_gradient(msg(2, vec![1.0, 1.0], 0)).unwrap();
        assert!(out.applied);
        assert_eq!((out.flushed_count, out.new_version, out.current_k), (1, 1, 1));
        assert_eq!(out.released, vec![2]);
    }

    #[test]
    fn hybrid_k3_trace() {
        let mut s = server(AggregationPolicy::hybrid(ThresholdSchedule::constant(3).unwrap()), 5);
        let a = s.submit_gradient(msg(0, vec![1.0, 0.0], 0)).unwrap();
        let b = s.submit_gradient(msg(4, vec![2.0, 0.0], 0)).unwrap();
        assert!(!a.applied && !b.applied);
        assert_eq!(s.buffer_len(), 2);
        assert_eq!(s.params().values, vec![1.0, 2.0]);
        let c = s.submit_gradient(msg(1, vec![3.0, 3.0], 0)).unwrap();
        assert!(c.applied);
        assert_eq!(c.flushed_count, 3);
        assert_eq!(c.released, vec![0, 4, 1]);
        assert_eq!(s.buffer_len(), 0);
        // mean gradient [2, 1], lr 0.01
        assert_eq!(s.params().values, vec![1.0 - 0.01 * 2.0, 2.0 - 0.01 * 1.0]);
    }

    #[test]
    fn sync_waits_for_every_worker() {
        let w = 25;
        let mut s = server(AggregationPolicy::Synchronous, w);
        for id in 0..w - 1 {
            let out = s.submit_gradient(msg(id, vec![1.0, 1.0], 0)).unwrap();
            assert!(!out.applied);
            assert_eq!(s.params().version, 0);
        }
        let out = s.submit_gradient(msg(w - 1, vec![1.0, 1.0], 0)).unwrap();
        assert!(out.applied);
        assert_eq!(out.flushed_count, w);
    }

    #[test]
    fn duplicate_worker_in_buffer_rejected() {
        let mut s = server(AggregationPolicy::Synchronous, 3);
        s.submit_gradient(msg(1, vec![0.0, 0.0], 0)).unwrap();
        assert!(s.submit_gradient(msg(1, vec![0.0, 0.0], 0)).unwrap_err().is_config());
    }

    #[test]
    fn submission_validation() {
        let mut s = server(AggregationPolicy::Asynchronous, 3);
        assert!(s.submit_gradient(msg(3, vec![0.0, 0.0], 0)).unwrap_err().is_config());
        assert!(s.submit_gradient(msg(0, vec![0.0], 0)).unwrap_err().is_config());
        assert!(matches!(
            s.submit_gradient(msg(0, vec![0.0, 0.0], 9)),
            Err(Error::Internal(_))
        ));
        assert!(matches!(
            s.submit_gradient(msg(0, vec![f64::NAN, 0.0], 0)),
            Err(Error::Numeric { .. })
        ));
    }

    #[test]
    fn hybrid_cap_above_worker_count_rejected() {
        let policy = AggregationPolicy::hybrid(ThresholdSchedule::step(10, 1, 8).unwrap());
        let err = ServerState::new(ParameterVector::new(vec![0.0_f64]), policy, 0.01, 4).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn fetch_tracks_versions_and_staleness() {
        let mut s = server(AggregationPolicy::Asynchronous, 4);
        for _ in 0..5 {
            s.submit_gradient(msg(0, vec![0.1, 0.1], s.update_count())).unwrap();
        }
        let snap = s.fetch_params();
        assert_eq!(snap.version, 5);
        assert_eq!(snap, s.fetch_params());
        for _ in 0..3 {
            s.submit_gradient(msg(1, vec![0.1, 0.1], s.update_count())).unwrap();
        }
        let out = s.submit_gradient(msg(2, vec![0.1, 0.1], snap.version)).unwrap();
        assert_eq!(s.fetch_params().version, out.new_version);
        assert_eq!(s.staleness_histogram().get(&3), Some(&1));
        assert_eq!(s.staleness_histogram().get(&0), Some(&8));
    }

    #[test]
    fn forced_flush_drains_partial_buffer() {
        let mut s = server(AggregationPolicy::Synchronous, 4);
        assert!(s.flush_pending().unwrap().is_none());
        s.submit_gradient(msg(0, vec![1.0, 1.0], 0)).unwrap();
        s.submit_gradient(msg(3, vec![3.0, 1.0], 0)).unwrap();
        let out = s.flush_pending().unwrap().unwrap();
        assert_eq!(out.flushed_count, 2);
        assert_eq!(s.gradients_flushed(), s.gradients_submitted());
    }

    #[test]
    fn sync_flush_equals_single_mean_step() {
        let w = 6;
        let base = ParameterVector::new(vec![0.5, -0.25, 3.0]);
        let grads: Vec<Vec<f64>> = (0..w)
            .map(|i| vec![0.1 * i as f64, (i as f64).sin(), 1.0 / (i + 1) as f64])
            .collect();
        let mut s = ServerState::new(base.clone(), AggregationPolicy::Synchronous, 0.01, w).unwrap();
        let msgs: Vec<_> = grads.iter().enumerate().map(|(i, g)| msg(i, g.clone(), 0)).collect();
        for m in msgs.iter().cloned() {
            s.submit_gradient(m).unwrap();
        }
        let mean = aggregate(&msgs).unwrap();
        let direct = sgd_apply(&base, &mean, 0.01).unwrap();
        assert_eq!(s.params(), &direct);
    }
}
