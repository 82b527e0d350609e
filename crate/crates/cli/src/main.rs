//! `ddsp`: data ingestion, forecasting, stochastic relocation planning and
//! evaluation from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ddsp_core::config::{ForecasterKind, PipelineConfig, CONFIG_ENV};
use ddsp_core::eval::{OptimizerMode, PlanMode};
use ddsp_core::nn::CellKind;
use ddsp_core::pipeline::HeadKind;

#[derive(Parser, Debug)]
#[command(name = "ddsp", version, about = "Probabilistic demand forecasting and stochastic fleet relocation")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set train.epochs=0` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Worker threads for parallel sections; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Master seed (overrides `seed` in the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Artifacts directory (overrides `paths.artifacts`).
    #[arg(long, global = true)]
    artifacts: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Aggregate a trip CSV into daily per-zone demand.
    Ingest {
        /// Trip CSV (default: `paths.trips`).
        #[arg(long)]
        trips: Option<PathBuf>,
        /// Zone map JSON (default: `paths.zones`).
        #[arg(long)]
        zones: Option<PathBuf>,
    },
    /// Generate regime-switching bimodal demand.
    Synth {
        /// Number of days (default: `synth.days`).
        #[arg(long)]
        days: Option<usize>,
        /// Also write a trip CSV and zone map that aggregate to the series.
        #[arg(long, default_value_t = false)]
        trips: bool,
    },
    /// Train a forecasting network and write a checkpoint.
    Train {
        /// Output head.
        #[arg(long, value_enum, default_value_t = HeadArg::Mdn)]
        head: HeadArg,
        /// Recurrent cell (default: `model.cell` for mdn, `model.point_cell` for point).
        #[arg(long, value_enum)]
        cell: Option<CellArg>,
    },
    /// Fit per-zone residual mixtures of the point network by EM.
    FitGmm,
    /// Forecast one day from the preceding window.
    Forecast {
        #[arg(long, value_enum)]
        forecaster: Option<ForecasterArg>,
        /// Target day (default: first test day).
        #[arg(long)]
        date: Option<chrono::NaiveDate>,
    },
    /// Solve the relocation program for a saved forecast.
    Optimize {
        #[arg(long, value_enum)]
        optimizer: Option<OptimizerArg>,
        /// Also export the LP in CPLEX LP format.
        #[arg(long)]
        lp: Option<PathBuf>,
        /// Comma-separated scenario counts for an SAA convergence table.
        #[arg(long, value_delimiter = ',')]
        saa: Vec<usize>,
    },
    /// Rolling evaluation over the test partition.
    Evaluate {
        #[arg(long, value_enum)]
        forecaster: Option<ForecasterArg>,
        #[arg(long, value_enum)]
        optimizer: Option<OptimizerArg>,
        #[arg(long, value_enum)]
        plan: Option<PlanArg>,
        /// Report name under `reports/` (default: derived from the modes).
        #[arg(long)]
        name: Option<String>,
    },
    /// Compare two evaluation reports (A against reference B).
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Output name under `reports/`.
        #[arg(long, default_value = "comparison")]
        name: String,
    },
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HeadArg {
    Mdn,
    Point,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CellArg {
    Gru,
    Lstm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ForecasterArg {
    Mdn,
    PostHoc,
    Point,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerArg {
    Stochastic,
    Deterministic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PlanArg {
    Replan,
    SinglePlan,
}

impl From<HeadArg> for HeadKind {
    fn from(h: HeadArg) -> Self {
        match h {
            HeadArg::Mdn => HeadKind::Mdn,
            HeadArg::Point => HeadKind::Point,
        }
    }
}

impl From<CellArg> for CellKind {
    fn from(c: CellArg) -> Self {
        match c {
            CellArg::Gru => CellKind::Gru,
            CellArg::Lstm => CellKind::Lstm,
        }
    }
}

impl From<ForecasterArg> for ForecasterKind {
    fn from(f: ForecasterArg) -> Self {
        match f {
            ForecasterArg::Mdn => ForecasterKind::Mdn,
            ForecasterArg::PostHoc => ForecasterKind::PostHoc,
            ForecasterArg::Point => ForecasterKind::Point,
        }
    }
}

impl From<OptimizerArg> for OptimizerMode {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Stochastic => OptimizerMode::Stochastic,
            OptimizerArg::Deterministic => OptimizerMode::Deterministic,
        }
    }
}

impl From<PlanArg> for PlanMode {
    fn from(p: PlanArg) -> Self {
        match p {
            PlanArg::Replan => PlanMode::Replan,
            PlanArg::SinglePlan => PlanMode::SinglePlan,
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut overrides = cli.overrides.clone();
    if let Some(t) = cli.threads {
        overrides.push(format!("threads={t}"));
    }
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(a) = &cli.artifacts {
        cfg.paths.artifacts = a.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = load_config(&cli)?;
    let threads = cfg.threads;
    match cli.command {
        Command::Ingest { trips, zones } => {
            if let Some(t) = trips {
                cfg.paths.trips = t;
            }
            if let Some(z) = zones {
                cfg.paths.zones = z;
            }
            commands::ingest(&cfg)
        }
        Command::Synth { days, trips } => {
            if let Some(d) = days {
                cfg.synth.days = d;
            }
            commands::synth(&cfg, trips)
        }
        Command::Train { head, cell } => {
            let head = HeadKind::from(head);
            let cell = cell.map(CellKind::from).unwrap_or(match head {
                HeadKind::Mdn => cfg.model.cell,
                HeadKind::Point => cfg.model.point_cell,
            });
            ddsp_core::exec::with_threads(threads, || commands::train(&cfg, head, cell))
        }
        Command::FitGmm => ddsp_core::exec::with_threads(threads, || commands::fit_gmm(&cfg)),
        Command::Forecast { forecaster, date } => {
            if let Some(f) = forecaster {
                cfg.eval.forecaster = f.into();
            }
            commands::forecast(&cfg, date)
        }
        Command::Optimize { optimizer, lp, saa } => {
            if let Some(o) = optimizer {
                cfg.eval.optimizer = o.into();
            }
            ddsp_core::exec::with_threads(threads, || commands::optimize(&cfg, lp.as_deref(), &saa))
        }
        Command::Evaluate {
            forecaster,
            optimizer,
            plan,
            name,
        } => {
            if let Some(f) = forecaster {
                cfg.eval.forecaster = f.into();
            }
            if let Some(o) = optimizer {
                cfg.eval.optimizer = o.into();
            }
            if let Some(p) = plan {
                cfg.eval.plan = p.into();
            }
            ddsp_core::exec::with_threads(threads, || commands::evaluate(&cfg, name.as_deref()))
        }
        Command::Compare { a, b, name } => commands::compare(&cfg, &a, &b, &name),
        Command::Config => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
