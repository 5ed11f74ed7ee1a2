use rayon::prelude::*;

use crate::data::{gen_synthetic, load_idx, shard, split, DatasetSplit};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::seed;
use crate::sim::{build_profiles, run_comparison, run_simulation, MetricsSeries, SimRun};

use super::config::{DatasetKind, ExperimentConfig, SweepAxis};
use super::summary::{summarize, ComparisonSummary};

const DATA_TAG: u64 = 1 << 41;
const SPLIT_TAG: u64 = 1 << 42;
const TEST_SUBSAMPLE_TAG: u64 = 1 << 43;

fn data_seed(config: &ExperimentConfig) -> u64 {
    if config.resample_dataset {
        let fp = u64::from_str_radix(&config.fingerprint(), 16).expect("hex fingerprint");
        seed::hash64(config.seed, fp)
    } else {
        config.seed
    }
}

/// Train/test data for a configuration. Synthetic data depends only on the
/// master seed unless `resample_dataset` is set.
pub fn load_split(config: &ExperimentConfig) -> Result<DatasetSplit<f64>> {
    let base = data_seed(config);
    match config.dataset {
        DatasetKind::Synthetic => {
            let data = gen_synthetic(&config.synthetic_params(), seed::hash64(base, DATA_TAG))?;
            split(&data, config.train_fraction, seed::hash64(base, SPLIT_TAG))
        }
        DatasetKind::Idx => {
            let path = |p: &Option<std::path::PathBuf>| {
                p.clone().ok_or_else(|| Error::config("idx dataset paths are required"))
            };
            let train = load_idx(path(&config.idx_train_images)?, path(&config.idx_train_labels)?)?;
            let test = load_idx(path(&config.idx_test_images)?, path(&config.idx_test_labels)?)?;
            if train.input_dim() != test.input_dim() {
                return Err(Error::config("idx train and test images differ in size"));
            }
            Ok(DatasetSplit {
                train: train.subsample(config.idx_train_subsample, seed::hash64(base, DATA_TAG)),
                test: test.subsample(config.idx_test_subsample, seed::hash64(base, TEST_SUBSAMPLE_TAG)),
            })
        }
    }
}

fn model_for(config: &ExperimentConfig, split: &DatasetSplit<f64>) -> Result<ModelSpec> {
    let classes = split.train.num_classes().max(split.test.num_classes());
    ModelSpec::new(split.train.input_dim(), classes, config.hidden_dims.clone())
}

/// Every configured policy for every round, round-major, with the simulator
/// diagnostics kept.
pub fn run_rounds_detailed(config: &ExperimentConfig) -> Result<Vec<SimRun>> {
    config.validate()?;
    let split = load_split(config)?;
    let spec = model_for(config, &split)?;
    let shards = shard(&split.train, config.worker_count)?;
    let profiles = build_profiles(shards, config.batch_size, &config.delay_model());
    let policies = config.resolved_policies()?;
    let fingerprint = config.fingerprint();

    let per_round: Vec<Vec<SimRun>> = (0..config.rounds)
        .into_par_iter()
        .map(|round| {
            let base = config.sim_config(round, policies[0].1);
            let runs = if policies.len() == 1 {
                let mut run = run_simulation(&base, &spec, &split, &profiles)
                    .map_err(|e| e.at(format!("policy {}", policies[0].0)))?;
                run.series.policy = policies[0].0.clone();
                vec![run]
            } else {
                run_comparison(&base, &policies, &spec, &split, &profiles)?
            };
            Ok(runs
                .into_iter()
                .map(|mut run| {
                    run.series.round = round;
                    run.series.fingerprint = fingerprint.clone();
                    run
                })
                .collect())
        })
        .map(|r: Result<Vec<SimRun>>| r)
        .enumerate()
        .map(|(round, r)| r.map_err(|e| e.at(format!("round {round}"))))
        .collect::<Result<_>>()?;
    Ok(per_round.into_iter().flatten().collect())
}

/// `rounds × policies` metric series. Round `r` seeds its runs with
/// `hash64(seed, r)`; within a round every policy starts from the same
/// weights and sees the same worker profiles.
pub fn run_rounds(config: &ExperimentConfig) -> Result<Vec<MetricsSeries>> {
    Ok(run_rounds_detailed(config)?
        .into_iter()
        .map(|r| r.series)
        .collect())
}

pub(crate) fn ours_and_baselines(config: &ExperimentConfig) -> Result<(String, Vec<String>)> {
    let specs = config.policy_specs()?;
    let ours = specs
        .iter()
        .position(|s| s.is_hybrid())
        .ok_or_else(|| Error::config("a comparison needs a hybrid policy"))?;
    let baselines: Vec<String> = config
        .policies
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != ours)
        .map(|(_, p)| p.clone())
        .collect();
    if baselines.is_empty() {
        return Err(Error::config("a comparison needs at least one baseline policy"));
    }
    Ok((config.policies[ours].clone(), baselines))
}

/// Series of one policy label, in round order.
pub(crate) fn of_policy(series: &[MetricsSeries], label: &str) -> Vec<MetricsSeries> {
    series.iter().filter(|s| s.policy == label).cloned().collect()
}

/// The hybrid policy against every other configured policy.
pub(crate) fn compare_all(config: &ExperimentConfig, series: &[MetricsSeries]) -> Result<Vec<ComparisonSummary>> {
    let (ours, baselines) = ours_and_baselines(config)?;
    let ours = of_policy(series, &ours);
    baselines
        .iter()
        .map(|b| summarize(&ours, &of_policy(series, b)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub value: f64,
    pub fingerprint: String,
    pub summaries: Vec<ComparisonSummary>,
    pub series: Vec<MetricsSeries>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn summary(&self, value: f64, baseline: &str) -> Option<&ComparisonSummary> {
        self.cells
            .iter()
            .find(|c| c.value == value)?
            .summaries
            .iter()
            .find(|s| s.baseline == baseline)
    }
}

/// One full set of rounds per swept value with everything else held fixed.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepTable> {
    config.validate()?;
    let axis = config
        .sweep_axis
        .ok_or_else(|| Error::config("sweep needs sweep_axis and sweep_values"))?;
    ours_and_baselines(config)?;
    let run_cell = |value: f64| -> Result<SweepCell> {
        let cell = config.with_swept(axis, value)?;
        let series = run_rounds(&cell)?;
        let summaries = compare_all(&cell, &series)?;
        Ok(SweepCell {
            value,
            fingerprint: cell.fingerprint(),
            summaries,
            series,
        })
    };
    let cells = config
        .sweep_values
        .iter()
        .map(|&v| run_cell(v).map_err(|e| e.at(format!("{} = {v}", axis.name()))))
        .collect::<Result<_>>()?;
    Ok(SweepTable { axis, cells })
}
