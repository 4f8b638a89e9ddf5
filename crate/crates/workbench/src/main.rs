use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epochsim::commands::{self, parse_axis, RunOptions, SweepAxis};
use epochsim::{CliError, WorkloadConfig};
use epochsim_core::ExecPolicy;

#[derive(Parser, Debug)]
#[command(name = "epochsim", version = env!("EPOCHSIM_VERSION"), about = "Systolic-array simulator for state-space layers and GEMM")]
struct Cli {
    /// Worker threads for tiles and sweep points.
    #[arg(long, global = true, env = "EPOCHSIM_THREADS")]
    threads: Option<usize>,
    /// Run independent work items one after another.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Workload config (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in workload instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    /// Maximum allowed absolute error against the reference model.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one workload and write report.json, trace.csv, outputs.csv and bandwidth.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a parameter grid and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grid axis `name=v1,v2,...` (n, h, dt, seq_len, batch, seed); repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<SweepAxis>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare against the conventional-array cost model and write compare.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<SweepAxis>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a config and its layer plans without simulating.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_param(s: &str) -> Result<SweepAxis, String> {
    parse_axis(s).map_err(|e| e.to_string())
}

fn load(c: &Common) -> Result<WorkloadConfig, CliError> {
    match (&c.config, &c.preset) {
        (Some(path), _) => WorkloadConfig::load(path),
        (None, Some(name)) => WorkloadConfig::from_preset(name),
        (None, None) => Err(CliError::Config("either --config or --preset is required".into())),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let opts = |c: &Common| RunOptions {
        tolerance: c.tolerance,
        seed: c.seed,
        threads: cli.threads,
        policy: if cli.sequential { ExecPolicy::Sequential } else { ExecPolicy::Parallel },
    };
    match &cli.command {
        Command::Simulate { common, out } => {
            let r = commands::simulate(&load(common)?, out, &opts(common))?;
            println!(
                "{}: {} cycles, first output at {}, max error {:e}, {:.3} nJ -> {}",
                r.name,
                r.cycles.total,
                r.first_output_latency.map_or_else(|| "-".into(), |c| c.to_string()),
                r.oracle.max_abs_error,
                r.energy.total_nj,
                out.display()
            );
        }
        Command::Sweep { common, params, out } => {
            let rows = commands::sweep(&load(common)?, params, out, &opts(common))?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} points ({failed} not ok) -> {}", rows.len(), out.join("sweep.csv").display());
        }
        Command::Compare { common, params, out } => {
            let rows = commands::compare(&load(common)?, params, out, &opts(common))?;
            for r in &rows {
                println!("N={} H={} T={}: cycle ratio {:.1}, energy ratio {:.1}", r.n, r.h, r.seq_len, r.cycle_ratio, r.energy_ratio);
            }
        }
        Command::Validate { common, out } => {
            let r = commands::validate(&load(common)?, out.as_deref(), &opts(common))?;
            println!("{}: {} plan(s) valid", r.name, r.plans.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("epochsim: {e}");
            e.into()
        }
    }
}
