use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cemrm::bundle::{write_text, Bundle};
use cemrm::config::{read_json, RunConfig, UsageError};
use cemrm::optimize::{optimize, OptimizeOptions};
use cemrm::{compare, evaluate, init_threads, json_text, retarget};
use cemrm_core::bench::{Benchmark, BenchmarkKind, DEFAULT_DIMENSION};
use cemrm_core::campaign::Mode;
use cemrm_core::retarget::Calibration;
use cemrm_core::sim::SimConfig;
use clap::{Parser, Subcommand};

/// Hand-design search with a cross-entropy optimizer and a learned reward
/// model. `CEMRM_THREADS` caps evaluation threads (0 = one per core).
#[derive(Parser)]
#[command(name = "cemrm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign; writes log.csv, checkpoint.json and final_design.json.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// pure-cem, hybrid, rho1 or random.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long)]
        iterations: Option<u64>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Checkpoint and stop once this many iterations are done.
        #[arg(long)]
        stop_after: Option<u64>,
        #[arg(long, default_value_t = 10)]
        checkpoint_every: u64,
        /// Record elapsed seconds in the wall_s column.
        #[arg(long)]
        wall_time: bool,
    },
    /// Run all four modes over several seeds and tabulate them.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// First seed; the others follow consecutively.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the per-run table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Disturbance-test success rates of a design.
    Evaluate {
        /// A design JSON or a final_design.json.
        #[arg(long)]
        design: PathBuf,
        /// Record bundle directory; the built-in set when absent.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replay every record with no jaw stroke and no tendon pull.
        #[arg(long)]
        zero_actuation: bool,
        /// Write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Turn a JSON-lines hand stream into teleoperation records.
    Retarget {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the synthetic benchmarks.
    BenchList,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    init_threads(std::env::var("CEMRM_THREADS").ok().as_deref())?;
    match cli.command {
        Command::Optimize { config, out, seed, mode, iterations, resume, stop_after, checkpoint_every, wall_time } => {
            let opts = OptimizeOptions { seed, mode, iterations, resume, stop_after, checkpoint_every, wall_time };
            let o = optimize(&config, &out, &opts)?;
            match o.result {
                Some(fd) => {
                    match fd.final_elite_mean {
                        Some(m) => println!("final elite mean: {m}"),
                        None => println!("final elite mean: -"),
                    }
                    println!("env_interactions: {}", fd.env_interactions);
                }
                None => println!("stopped after iteration {}; resume from {}", o.completed, out.join("checkpoint.json").display()),
            }
        }
        Command::Compare { config, seeds, seed, csv } => {
            let cfg = RunConfig::load(&config)?;
            let c = compare::compare(&cfg, seed, seeds)?;
            print!("{}", c.summary());
            if let Some(p) = csv {
                std::fs::write(&p, c.to_csv()?).with_context(|| format!("cannot write {}", p.display()))?;
            }
        }
        Command::Evaluate { design, bundle, trials, seed, zero_actuation, json } => {
            let d = evaluate::read_design(&design)?;
            let sim = SimConfig::default();
            let mut b = match &bundle {
                Some(dir) => Bundle::load(dir)?,
                None => Bundle::builtin(&sim),
            };
            if zero_actuation {
                evaluate::zero_actuation(&mut b);
            }
            let report = evaluate::evaluate(&d, b, sim, trials, seed)?;
            print!("{}", report.table());
            if let Some(p) = json {
                write_text(&p, &json_text(&report))?;
            }
        }
        Command::Retarget { stream, calibration, out } => {
            let cal: Calibration = match &calibration {
                Some(p) => read_json(p)?,
                None => Calibration::default(),
            };
            let o = retarget::retarget(&stream, &cal, &out)?;
            for w in &o.warnings {
                eprintln!("warning: {w}");
            }
            for (p, r) in &o.records {
                println!("{} ({})", p.display(), r.object_id);
            }
        }
        Command::BenchList => {
            println!("{:<16} {:>4} {:>10}  invalid region", "name", "d", "optimum");
            for kind in BenchmarkKind::ALL {
                let b = Benchmark::new(kind, DEFAULT_DIMENSION)?;
                println!("{:<16} {:>4} {:>10}  {}", b.name(), b.dimension, b.optimum_value(), kind.invalid_region());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
