//! Experiment harness: JSON configuration, multi-round policy comparisons,
//! parameter sweeps and CSV output.

mod config;
mod csv_io;
mod policy;
mod runner;
mod summary;

pub use crate::sim::{MetricRecord, MetricsSeries};
pub use config::{DatasetKind, ExperimentConfig, SweepAxis};
pub use csv_io::{
    emit_series_csv, emit_summary_csv, emit_sweep_csv, format_sig9, parse_series_csv,
    read_series_csv, write_series_csv, write_summary_csv, write_sweep_csv, SERIES_COLUMNS,
};
pub use policy::PolicySpec;
pub use runner::{load_split, run_rounds, run_rounds_detailed, sweep, SweepCell, SweepTable};
pub use summary::{summarize, ComparisonSummary};
