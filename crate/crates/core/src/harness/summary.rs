use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::MetricsSeries;

/// Mean of `ours - baseline` over every evaluation time of every round.
/// Accuracy is in percentage points, losses in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub ours: String,
    pub baseline: String,
    pub d_accuracy: f64,
    pub d_test_loss: f64,
    pub d_train_loss: f64,
    /// Number of (round, time) pairs averaged.
    pub points: usize,
}

/// Pairs series by round and requires identical evaluation times.
pub fn summarize(ours: &[MetricsSeries], baseline: &[MetricsSeries]) -> Result<ComparisonSummary> {
    if ours.is_empty() || ours.len() != baseline.len() {
        return Err(Error::Internal(format!(
            "cannot compare {} series against {}",
            ours.len(),
            baseline.len()
        )));
    }
    let label = |set: &[MetricsSeries]| set[0].policy.clone();
    let (mut acc, mut test, mut train) = (0.0, 0.0, 0.0);
    let mut points = 0usize;
    // round order fixes the summation order, so swapping arguments negates exactly
    let mut ordered: Vec<&MetricsSeries> = ours.iter().collect();
    ordered.sort_by_key(|s| s.round);
    for a in ordered {
        let b = baseline
            .iter()
            .find(|b| b.round == a.round)
            .ok_or_else(|| Error::Internal(format!("baseline has no round {}", a.round)))?;
        if a.records.len() != b.records.len()
            || a.records.iter().zip(&b.records).any(|(x, y)| x.time != y.time)
        {
            return Err(Error::Internal(format!(
                "evaluation grids of round {} do not line up",
                a.round
            )));
        }
        for (x, y) in a.records.iter().zip(&b.records) {
            acc += x.test_accuracy - y.test_accuracy;
            test += x.test_loss - y.test_loss;
            train += x.train_loss - y.train_loss;
            points += 1;
        }
    }
    if points == 0 {
        return Err(Error::Internal("series hold no evaluation records".into()));
    }
    let n = points as f64;
    Ok(ComparisonSummary {
        ours: label(ours),
        baseline: label(baseline),
        d_accuracy: acc / n * 100.0,
        d_test_loss: test / n,
        d_train_loss: train / n,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::MetricRecord;

    fn series(policy: &str, round: usize, acc: &[f64]) -> MetricsSeries {
        MetricsSeries {
            policy: policy.into(),
            round,
            fingerprint: String::new(),
            records: acc
                .iter()
                .enumerate()
                .map(|(i, &a)| MetricRecord {
                    time: i as f64,
                    train_loss: 1.0 - a,
                    test_loss: 1.5 - a,
                    test_accuracy: a,
                    update_count: i as u64,
                    current_k: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn identical_series_give_zero() {
        let a = [series("x", 0, &[0.3, 0.7, 0.9])];
        let s = summarize(&a, &a).unwrap();
        assert_eq!((s.d_accuracy, s.d_test_loss, s.d_train_loss), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_point_example() {
        let ours = [series("hybrid", 0, &[0.50, 0.60])];
        let base = [series("async", 0, &[0.40, 0.44])];
        let s = summarize(&ours, &base).unwrap();
        assert!((s.d_accuracy - 13.0).abs() < 1e-12, "{}", s.d_accuracy);
        assert!((s.d_test_loss + 0.13).abs() < 1e-12);
        assert_eq!(s.baseline, "async");
        assert_eq!(s.points, 2);
    }

    #[test]
    fn misaligned_grids_are_internal_errors() {
        let a = [series("a", 0, &[0.1, 0.2])];
        let b = [series("b", 0, &[0.1, 0.2, 0.3])];
        assert!(matches!(summarize(&a, &b), Err(Error::Internal(_))));
        let c = [series("c", 1, &[0.1, 0.2])];
        assert!(matches!(summarize(&a, &c), Err(Error::Internal(_))));
    }

    #[test]
    fn antisymmetric() {
        let a = [series("a", 0, &[0.13, 0.29, 0.71]), series("a", 1, &[0.2, 0.3, 0.33])];
        let b = [series("b", 1, &[0.17, 0.5, 0.61]), series("b", 0, &[0.11, 0.37, 0.9])];
        let ab = summarize(&a, &b).unwrap();
        let ba = summarize(&b, &a).unwrap();
        assert_eq!(ab.d_accuracy, -ba.d_accuracy);
        assert_eq!(ab.d_test_loss, -ba.d_test_loss);
        assert_eq!(ab.d_train_loss, -ba.d_train_loss);
    }
}
