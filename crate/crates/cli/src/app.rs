//! Command definitions and dispatch.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use servesim_core::batcher::{schedule, SchedulerKind};
use servesim_core::deployer::{plan, PlannerKind};
use servesim_core::simulator::{profile_trace, run_experiment, Preset};

use crate::config::load_config;
use crate::gen::{gen_trace, ArrivalModel, LenDist};
use crate::io;

#[derive(Debug, Parser)]
#[command(
    name = "servesim",
    version,
    about = "Trace-driven comparison of batch schedulers and layer placements for LLM serving"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Place model layers onto devices and emit the device map.
    Plan {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// helr, he, lr, or bgs.
        #[arg(long, default_value = "helr")]
        planner: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Profile a trace and group it into batch plans.
    Schedule {
        #[arg(long)]
        trace: PathBuf,
        /// slo-odbs, slo-dbs, odbs, or fifo.
        #[arg(long, default_value = "slo-odbs")]
        scheduler: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed for the profiler's predictor noise.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline and emit a metrics record.
    Simulate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// ud, ub, ua, or baseline; mutually exclusive with --scheduler/--planner.
        #[arg(long, conflicts_with_all = ["scheduler", "planner"])]
        preset: Option<String>,
        #[arg(long)]
        scheduler: Option<String>,
        #[arg(long)]
        planner: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded synthetic trace.
    Gen {
        #[arg(long)]
        count: usize,
        /// poisson:<rate> or fixed:<gap>.
        #[arg(long, default_value = "poisson:1.0")]
        arrival: String,
        /// uniform:<lo>,<hi> or lognormal:<mu>,<sigma>; draws inputs and outputs.
        #[arg(long, default_value = "uniform:16,256")]
        len_dist: String,
        /// Uniform SLO bounds in seconds, as <lo>,<hi>.
        #[arg(long, default_value = "1,350")]
        slo_range: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize metric records as a table, optionally writing a CSV.
    Report {
        /// Metric record files produced by `simulate`.
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            let mut writer = BufWriter::new(file);
            write(&mut writer)?;
            writer.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn parse_slo_range(s: &str) -> Result<(f64, f64)> {
    let parse = |v: &str| -> Result<f64> {
        v.trim()
            .parse::<f64>()
            .with_context(|| format!("invalid slo bound '{v}'"))
    };
    let (lo, hi) = s
        .split_once(',')
        .with_context(|| format!("invalid --slo-range '{s}' (expected <lo>,<hi>)"))?;
    Ok((parse(lo)?, parse(hi)?))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan { topology, model, planner, config, out } => {
            let topo = io::topology::load_topology(&topology)?;
            let spec = io::model::load_model(&model)?;
            let cfg = load_config(config.as_deref())?;
            let kind: PlannerKind = planner.parse()?;
            let (map, _latency) = plan(kind, &spec, &topo, &cfg.deployer)?;
            emit(out.as_deref(), |w| io::device_map::write_device_map(w, &map))
        }
        Command::Schedule { trace, scheduler, config, seed, out } => {
            let requests = io::trace::load_trace(&trace)?;
            let cfg = load_config(config.as_deref())?;
            let kind: SchedulerKind = scheduler.parse()?;
            let profiled = profile_trace(&requests, &cfg.predictor, &cfg.monitor, seed);
            let plans = schedule(kind, &profiled, &cfg.scheduler)?;
            emit(out.as_deref(), |w| io::metrics::write_plans(w, &plans))
        }
        Command::Simulate {
            trace,
            topology,
            model,
            preset,
            scheduler,
            planner,
            config,
            seed,
            out,
        } => {
            let requests = io::trace::load_trace(&trace)?;
            let topo = io::topology::load_topology(&topology)?;
            let spec = io::model::load_model(&model)?;
            let cfg = load_config(config.as_deref())?;
            let (scheduler_kind, planner_kind) = match preset {
                Some(name) => {
                    let preset: Preset = name.parse()?;
                    (preset.scheduler(), preset.planner())
                }
                None => (
                    scheduler.as_deref().unwrap_or("slo-odbs").parse()?,
                    planner.as_deref().unwrap_or("helr").parse()?,
                ),
            };
            let metrics =
                run_experiment(&requests, &topo, &spec, scheduler_kind, planner_kind, &cfg, seed)?;
            emit(out.as_deref(), |w| io::metrics::write_metrics(w, &metrics))
        }
        Command::Gen { count, arrival, len_dist, slo_range, seed, out } => {
            let arrival: ArrivalModel = arrival.parse()?;
            let lens: LenDist = len_dist.parse()?;
            let range = parse_slo_range(&slo_range)?;
            let trace = gen_trace(count, &arrival, &lens, range, seed)?;
            emit(out.as_deref(), |w| io::trace::write_trace(w, &trace))
        }
        Command::Report { records, out } => {
            let mut loaded = Vec::with_capacity(records.len());
            for path in &records {
                let label = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                loaded.push((label, io::metrics::load_metrics(path)?));
            }
            print!("{}", io::metrics::render_table(&loaded));
            if let Some(path) = out {
                std::fs::write(&path, io::metrics::render_csv(&loaded))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
    }
}
