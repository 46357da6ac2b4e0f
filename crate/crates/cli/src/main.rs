use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use marketsim::analytics::{self, learning_curves_from_nav, MetricDistribution};
use marketsim::calibration::{enumerate_grid, split_tickers, sweep, SweepPlan};
use marketsim::engine::batch_seeds;
use marketsim::io::{self, IngestOptions, RunOutput, RunSeries};
use marketsim::{SimConfig, SimError};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(
    name = "marketsim",
    version,
    about = "Multi-agent stock market simulator with reinforcement-learning traders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Agents act uniformly at random and never learn.
        #[arg(long)]
        noise: bool,
        /// Skip the per-agent NAV table.
        #[arg(long)]
        no_nav: bool,
        #[arg(long)]
        overwrite: bool,
    },
    /// Simulate a batch of runs with consecutive seeds.
    Batch {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Overrides the configured run count.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        noise: bool,
        #[arg(long)]
        no_nav: bool,
        #[arg(long)]
        overwrite: bool,
    },
    /// Score the calibration grid against real data.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        real: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Overrides the configured runs per point.
        #[arg(long)]
        runs: Option<usize>,
        /// Score only the first N grid points.
        #[arg(long)]
        limit: Option<usize>,
        /// Seed of the train/test ticker split.
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
    },
    /// Compute metric distributions and learning curves of a run or batch.
    Analyze {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Compare simulated output with real daily data.
    Compare {
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        real: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write the curated real data.
        #[arg(long)]
        curated: Option<PathBuf>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Write the fundamental series and sample agent views of a config.
    GenFundamentals {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of agents whose biased views are written.
        #[arg(long, default_value_t = 10)]
        views: usize,
        #[arg(long)]
        overwrite: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| c.downcast_ref::<SimError>().is_some_and(SimError::is_validation));
            ExitCode::from(if validation { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}

fn load_config(path: &Path) -> Result<SimConfig> {
    io::parse_config(path).with_context(|| format!("loading config {}", path.display()))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out, seed, noise, no_nav, overwrite } => {
            let mut cfg = load_config(&config)?;
            cfg.noise_agent_mode |= noise;
            let seed = seed.unwrap_or(cfg.master_seed);
            io::prepare_output_dir(&out, overwrite)?;
            let result = marketsim::run(&cfg, seed)?;
            io::write_run(&result, &out, true, RunOutput { nav: !no_nav })?;
            eprintln!(
                "run seed {seed}: {} steps, {} trades, {} bankruptcies -> {}",
                cfg.step_count,
                result.diagnostics.trades,
                result.bankruptcies.len(),
                out.display()
            );
        }
        Command::Batch { config, out, runs, noise, no_nav, overwrite } => {
            let mut cfg = load_config(&config)?;
            cfg.noise_agent_mode |= noise;
            if let Some(s) = runs {
                cfg.run_count = s;
            }
            let cfg = cfg.validate().map_err(SimError::InvalidConfig)?;
            io::prepare_output_dir(&out, overwrite)?;
            let results = marketsim::run_batch(&cfg, &batch_seeds(&cfg)).into_iter().collect::<Result<Vec<_>, _>>()?;
            io::write_batch(&results, &out, true, RunOutput { nav: !no_nav })?;
            eprintln!("batch of {} runs -> {}", results.len(), out.display());
        }
        Command::Sweep { config, real, out, resume, runs, limit, split_seed } => {
            let mut base = load_config(&config)?;
            if let Some(s) = runs {
                base.run_count = s;
            }
            let base = base.validate().map_err(SimError::InvalidConfig)?;
            let checkpoint = out.join("sweep_checkpoint.csv");
            if checkpoint.exists() && !resume {
                bail!(SimError::InvalidParameter(format!(
                    "{} holds a sweep checkpoint; pass --resume to continue it",
                    checkpoint.display()
                )));
            }
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let data = io::ingest_real(&real, IngestOptions::default())?;
            if data.series.is_empty() {
                bail!(SimError::InvalidParameter(format!("{} has no continuously traded ticker", real.display())));
            }
            let (train_names, test_names) = split_tickers(&data.tickers(), split_seed);
            let train = io::real_metrics(&data.subset(&train_names))?;
            let test = if test_names.is_empty() { None } else { Some(io::real_metrics(&data.subset(&test_names))?) };
            let mut points = enumerate_grid();
            if let Some(n) = limit {
                points.truncate(n);
            }
            let seeds = batch_seeds(&base);
            eprintln!(
                "sweeping {} points x {} runs; train {} tickers, test {}",
                points.len(),
                seeds.len(),
                train_names.len(),
                test_names.len()
            );
            let plan = SweepPlan { points: &points, base: &base, train: &train, test: test.as_deref(), seeds: &seeds };
            let ranked = sweep(&plan, Some(&checkpoint))?;
            io::write_sweep_report(&out, true, &ranked)?;
            if let Some(best) = ranked.first() {
                eprintln!("best point {:?} score {}", best.point, best.score);
            }
        }
        Command::Analyze { input, out, overwrite } => {
            let runs = read_runs(&input)?;
            let metrics = metrics_of(&runs)?;
            let navs: Vec<&[Vec<f64>]> = runs.iter().filter_map(|r| r.nav.as_deref()).collect();
            let curves = if navs.len() == runs.len() { Some(learning_curves_from_nav(&navs)?) } else { None };
            io::write_analysis(&out, overwrite, &metrics, curves.as_ref())?;
            eprintln!("analyzed {} runs -> {}", runs.len(), out.display());
        }
        Command::Compare { sim, real, out, curated, overwrite } => {
            let runs = read_runs(&sim)?;
            let sim_metrics = metrics_of(&runs)?;
            let data = io::ingest_real(&real, IngestOptions::default())?;
            if data.series.is_empty() {
                bail!(SimError::InvalidParameter(format!("{} has no continuously traded ticker", real.display())));
            }
            let real_metrics = io::real_metrics(&data.series)?;
            io::write_comparison(&out, overwrite, &sim_metrics, &real_metrics, &data.report)?;
            if let Some(path) = curated {
                io::write_real(&path, &data.series)?;
            }
            eprintln!(
                "compared {} runs with {} tickers ({} dropped, {} rows rejected) -> {}",
                runs.len(),
                data.report.retained,
                data.report.dropped.len(),
                data.report.rejected.len(),
                out.display()
            );
        }
        Command::GenFundamentals { config, out, seed, views, overwrite } => {
            let cfg = load_config(&config)?;
            io::write_fundamentals(&cfg, seed.unwrap_or(cfg.master_seed), views, &out, overwrite)?;
            eprintln!("fundamentals for {} stocks -> {}", cfg.stock_count, out.display());
        }
    }
    Ok(())
}

fn read_runs(dir: &Path) -> Result<Vec<RunSeries>> {
    io::find_runs(dir)?.iter().map(|d| io::read_run(d).with_context(|| format!("reading {}", d.display()))).collect()
}

fn metrics_of(runs: &[RunSeries]) -> Result<Vec<MetricDistribution>> {
    let daily: Vec<_> = runs.iter().flat_map(RunSeries::daily).collect();
    Ok(analytics::compute_metrics(&daily)?)
}
