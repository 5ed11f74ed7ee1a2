//! `hsgd`: run policy comparisons and sweeps, summarize existing series.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hybrid_sgd::harness::{
    read_series_csv, run_rounds, summarize, sweep, write_series_csv, write_summary_csv,
    write_sweep_csv, ExperimentConfig, MetricsSeries, PolicySpec,
};
use hybrid_sgd::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "hsgd", version, about = "Synchronous, asynchronous and hybrid data-parallel SGD on a simulated cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON experiment configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated policies, e.g. `sync,async,hybrid:300`.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every policy for every round; write one series CSV per policy.
    Run(Common),
    /// Run the configured sweep; write one table CSV per baseline.
    Sweep(Common),
    /// Summarize existing series CSVs: first policy against the others.
    Compare {
        /// Series CSV files written by `run`.
        #[arg(long, num_args = 1.., required = true)]
        series: Vec<PathBuf>,
        /// `ours,baseline[,baseline...]`; defaults to `hybrid,async,sync`.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    if let Some(policies) = &common.policies {
        config.policies = policies.clone();
    }
    config.validate()?;
    Ok(config)
}

fn file_label(policy: &str) -> String {
    policy
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

fn summarize_against(series: &[MetricsSeries], ours: &str, baselines: &[String]) -> Result<Vec<hybrid_sgd::harness::ComparisonSummary>> {
    let pick = |label: &str| -> Result<Vec<MetricsSeries>> {
        let picked: Vec<_> = series.iter().filter(|s| s.policy == label).cloned().collect();
        if picked.is_empty() {
            return Err(Error::Config(format!("no series for policy '{label}'")));
        }
        Ok(picked)
    };
    let ours_series = pick(ours)?;
    baselines
        .iter()
        .map(|b| summarize(&ours_series, &pick(b)?))
        .collect()
}

fn write_config(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_json()).map_err(|e| Error::Io { path, source: e })
}

fn run(config: ExperimentConfig) -> Result<()> {
    let series = run_rounds(&config)?;
    let dir = &config.output_dir;
    write_config(&config, dir)?;
    for label in &config.policies {
        let mine: Vec<_> = series.iter().filter(|s| &s.policy == label).cloned().collect();
        let path = dir.join(format!("series_{}.csv", file_label(label)));
        write_series_csv(&mine, &path)?;
        eprintln!("wrote {}", path.display());
    }
    let specs = config.policy_specs()?;
    if let Some(i) = specs.iter().position(PolicySpec::is_hybrid) {
        let baselines: Vec<String> = config
            .policies
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, p)| p.clone())
            .collect();
        if !baselines.is_empty() {
            let summaries = summarize_against(&series, &config.policies[i], &baselines)?;
            for s in &summaries {
                eprintln!(
                    "{} - {}: accuracy {:+.3} pts, test loss {:+.4}, train loss {:+.4}",
                    s.ours, s.baseline, s.d_accuracy, s.d_test_loss, s.d_train_loss
                );
            }
            write_summary_csv(&summaries, dir.join("summary.csv"))?;
        }
    }
    Ok(())
}

fn run_sweep(config: ExperimentConfig) -> Result<()> {
    let table = sweep(&config)?;
    let dir = &config.output_dir;
    write_config(&config, dir)?;
    let baselines: Vec<String> = table
        .cells
        .first()
        .map(|c| c.summaries.iter().map(|s| s.baseline.clone()).collect())
        .unwrap_or_default();
    for b in &baselines {
        let path = dir.join(format!("sweep_{}_vs_{}.csv", table.axis.name(), file_label(b)));
        write_sweep_csv(&table, b, &path)?;
        eprintln!("wrote {}", path.display());
    }
    for cell in &table.cells {
        let sub = dir.join(format!("{}_{}", table.axis.name(), hybrid_sgd::harness::format_sig9(cell.value)));
        write_series_csv(&cell.series, sub.join("series.csv"))?;
    }
    Ok(())
}

fn compare(files: &[PathBuf], policies: Option<Vec<String>>, out: &Path) -> Result<()> {
    let mut series = Vec::new();
    for f in files {
        series.extend(read_series_csv(f)?);
    }
    let (ours, baselines) = match policies {
        Some(mut p) if p.len() >= 2 => {
            let ours = p.remove(0);
            (ours, p)
        }
        Some(_) => return Err(Error::Config("--policies needs ours and at least one baseline".into())),
        None => {
            let present = |l: &str| series.iter().any(|s| s.policy == l);
            let baselines: Vec<String> = ["async", "sync"].iter().filter(|l| present(l)).map(|l| l.to_string()).collect();
            ("hybrid".to_string(), baselines)
        }
    };
    if baselines.is_empty() {
        return Err(Error::Config("no baseline series to compare against".into()));
    }
    let summaries = summarize_against(&series, &ours, &baselines)?;
    let path = out.join("summary.csv");
    write_summary_csv(&summaries, &path)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(common) => load_config(&common).and_then(run),
        Command::Sweep(common) => load_config(&common).and_then(run_sweep),
        Command::Compare { series, policies, out } => compare(&series, policies, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
