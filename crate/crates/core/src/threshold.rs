//! Flush threshold schedule for the hybrid policy.
//!
//! `K(u) = min(k_max, k_initial + floor(u / step_size))`, where `u` counts
//! applied server updates. Starting at `K = 1` the server behaves
//! asynchronously; once `K` reaches the worker count every flush waits for
//! all workers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    kind: ScheduleKind,
    step_size: u64,
    k_initial: usize,
    k_max: usize,
}

impl ThresholdSchedule {
    pub fn step(step_size: u64, k_initial: usize, k_max: usize) -> Result<Self> {
        if step_size == 0 {
            return Err(Error::config("threshold step size must be at least 1"));
        }
        if k_initial == 0 || k_initial > k_max {
            return Err(Error::config(format!(
                "threshold bounds must satisfy 1 <= k_initial ({k_initial}) <= k_max ({k_max})"
            )));
        }
        Ok(Self {
            kind: ScheduleKind::Step,
            step_size,
            k_initial,
            k_max,
        })
    }

    /// A schedule pinned at `k` forever.
    pub fn constant(k: usize) -> Result<Self> {
        Self::step(u64::MAX, k, k)
    }

    /// Step size expressed as a multiple of `1 / lr`, rounded to the nearest
    /// update count (3/lr at lr 0.01 is 300).
    pub fn from_lr_multiple(multiple: f64, lr: f64, k_max: usize) -> Result<Self> {
        let steps = (multiple / lr).round();
        if !(steps >= 1.0) || !steps.is_finite() {
            return Err(Error::config(format!(
                "step size {multiple}/lr at lr {lr} is not a positive update count"
            )));
        }
        Self::step(steps as u64, 1, k_max)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn step_size(&self) -> u64 {
        self.step_size
    }

    pub fn k_initial(&self) -> usize {
        self.k_initial
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn threshold_at(&self, update_count: u64) -> usize {
        threshold_at(self, update_count)
    }
}

pub fn threshold_at(schedule: &ThresholdSchedule, update_count: u64) -> usize {
    match schedule.kind {
        ScheduleKind::Step => {
            let increments = update_count / schedule.step_size;
            let headroom = (schedule.k_max - schedule.k_initial) as u64;
            schedule.k_initial + increments.min(headroom) as usize
        }
    }
}

pub fn should_flush(buffer_len: usize, k: usize) -> bool {
    buffer_len >= k
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_examples() {
        let s300 = ThresholdSchedule::step(300, 1, 25).unwrap();
        assert_eq!(s300.threshold_at(0), 1);
        let s500 = ThresholdSchedule::step(500, 1, 25).unwrap();
        assert_eq!(s500.threshold_at(12_000), 25);
        assert_eq!(s500.threshold_at(499), 1);
        assert_eq!(s500.threshold_at(500), 2);
        assert_eq!(s500.threshold_at(u64::MAX), 25);
    }

    #[test]
    fn lr_multiple_rounds_to_updates() {
        let s = ThresholdSchedule::from_lr_multiple(3.0, 0.01, 25).unwrap();
        assert_eq!(s.step_size(), 300);
        let s = ThresholdSchedule::from_lr_multiple(7.0, 0.01, 25).unwrap();
        assert_eq!(s.step_size(), 700);
        assert!(ThresholdSchedule::from_lr_multiple(0.0, 0.01, 25).is_err());
    }

    #[test]
    fn invalid_schedules_rejected() {
        assert!(ThresholdSchedule::step(0, 1, 5).is_err());
        assert!(ThresholdSchedule::step(10, 0, 5).is_err());
        assert!(ThresholdSchedule::step(10, 6, 5).is_err());
    }

    #[test]
    fn flush_predicate() {
        assert!(should_flush(1, 1));
        assert!(!should_flush(24, 25));
        assert!(should_flush(25, 25));
        assert!(!should_flush(0, 1));
    }

    #[test]
    fn constant_schedules_are_regime_endpoints() {
        let async_like = ThresholdSchedule::constant(1).unwrap();
        let sync_like = ThresholdSchedule::constant(25).unwrap();
        for u in [0, 1, 1000, u64::MAX] {
            assert!(should_flush(1, async_like.threshold_at(u)));
            assert!(!should_flush(24, sync_like.threshold_at(u)));
            assert!(should_flush(25, sync_like.threshold_at(u)));
        }
    }

    proptest! {
        #[test]
        fn monotone_and_bounded(step in 1u64..2000, k0 in 1usize..30, extra in 0usize..30,
                                 u in 0u64..1_000_000, du in 0u64..100_000) {
            let s = ThresholdSchedule::step(step, k0, k0 + extra).unwrap();
            let a = s.threshold_at(u);
            let b = s.threshold_at(u + du);
            prop_assert!(a <= b);
            prop_assert!(a >= s.k_initial() && b <= s.k_max());
            prop_assert_eq!(s.threshold_at(0), k0);
        }
    }
}
