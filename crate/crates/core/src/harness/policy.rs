use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::server::AggregationPolicy;
use crate::threshold::ThresholdSchedule;

/// A policy as written on the command line or in a config file.
///
/// `sync`, `async`, `hybrid` (schedule from the config), `hybrid:<step>`
/// or `hybrid:<step>:<k_initial>:<k_max>`. `hybrid:1:1:1` is a hybrid
/// server pinned at `K = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    Sync,
    Async,
    Hybrid {
        step_size: Option<u64>,
        bounds: Option<(usize, usize)>,
    },
}

impl PolicySpec {
    pub fn is_hybrid(&self) -> bool {
        matches!(self, PolicySpec::Hybrid { .. })
    }

    pub fn resolve(&self, default_step: u64, default_k_initial: usize, worker_count: usize) -> Result<AggregationPolicy> {
        Ok(match *self {
            PolicySpec::Sync => AggregationPolicy::Synchronous,
            PolicySpec::Async => AggregationPolicy::Asynchronous,
            PolicySpec::Hybrid { step_size, bounds } => {
                let (k0, kmax) = bounds.unwrap_or((default_k_initial, worker_count));
                if kmax > worker_count {
                    return Err(Error::config(format!(
                        "policy {self}: threshold cap {kmax} exceeds worker count {worker_count}"
                    )));
                }
                AggregationPolicy::hybrid(ThresholdSchedule::step(
                    step_size.unwrap_or(default_step),
                    k0,
                    kmax,
                )?)
            }
        })
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("unknown policy '{s}'"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| p.parse::<u64>().map_err(|_| bad());
        match parts.as_slice() {
            ["sync"] => Ok(PolicySpec::Sync),
            ["async"] => Ok(PolicySpec::Async),
            ["hybrid"] => Ok(PolicySpec::Hybrid { step_size: None, bounds: None }),
            ["hybrid", step] => Ok(PolicySpec::Hybrid { step_size: Some(num(step)?), bounds: None }),
            ["hybrid", step, k0, kmax] => Ok(PolicySpec::Hybrid {
                step_size: Some(num(step)?),
                bounds: Some((num(k0)? as usize, num(kmax)? as usize)),
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Sync => f.write_str("sync"),
            PolicySpec::Async => f.write_str("async"),
            PolicySpec::Hybrid { step_size: None, .. } => f.write_str("hybrid"),
            PolicySpec::Hybrid { step_size: Some(s), bounds: None } => write!(f, "hybrid:{s}"),
            PolicySpec::Hybrid { step_size: Some(s), bounds: Some((a, b)) } => write!(f, "hybrid:{s}:{a}:{b}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        for s in ["sync", "async", "hybrid", "hybrid:300", "hybrid:1:1:1"] {
            assert_eq!(s.parse::<PolicySpec>().unwrap().to_string(), s);
        }
        for s in ["", "hybrid:", "hybrid:x", "hybrid:1:2", "ssp"] {
            assert!(s.parse::<PolicySpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn resolve_defaults_to_worker_cap() {
        let p: PolicySpec = "hybrid".parse().unwrap();
        match p.resolve(500, 1, 25).unwrap() {
            AggregationPolicy::Hybrid { schedule } => {
                assert_eq!((schedule.step_size(), schedule.k_initial(), schedule.k_max()), (500, 1, 25));
            }
            other => panic!("{other:?}"),
        }
        let bad: PolicySpec = "hybrid:5:3:2".parse().unwrap();
        assert!(bad.resolve(500, 1, 25).is_err());
    }
}
