use serde::{Deserialize, Serialize};

/// One evaluation point of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    /// Virtual seconds since the start of the run.
    pub time: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub update_count: u64,
    pub current_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub policy: String,
    pub round: usize,
    /// Hash of the experiment configuration that produced the series.
    pub fingerprint: String,
    pub records: Vec<MetricRecord>,
}

impl MetricsSeries {
    pub fn new(policy: impl Into<String>, round: usize) -> Self {
        Self {
            policy: policy.into(),
            round,
            fingerprint: String::new(),
            records: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&MetricRecord> {
        self.records.last()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.time)
    }

    /// Same evaluation points and values, ignoring labels.
    pub fn same_trajectory(&self, other: &Self) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.time.to_bits() == b.time.to_bits()
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.test_loss.to_bits() == b.test_loss.to_bits()
                    && a.test_accuracy.to_bits() == b.test_accuracy.to_bits()
                    && a.update_count == b.update_count
                    && a.current_k == b.current_k
            })
    }
}
