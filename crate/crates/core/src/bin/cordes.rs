//! Batch experiment harness.
//!
//! `cordes run --config <path> [--out <dir>] [--workers <k>]` runs one
//! configured experiment, writing a CSV table and a JSON summary; exit
//! status is 0 when every assertion passes, 1 on a numerical assertion
//! failure, 2 on a configuration/schema error.  `cordes list` prints the
//! experiment registry; `cordes schema` prints the config JSON schema.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use cordes_core::error::CordesError;
use cordes_core::experiments::{
    config_schema, run_experiment, write_outputs, ExperimentConfig, EXPERIMENTS,
};

#[derive(Parser)]
#[command(name = "cordes", version, about = "deterministic experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config
    Run(RunArgs),
    /// List the registered experiments
    List {
        /// print the registry as JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Print the JSON schema for experiment configs
    Schema,
}

#[derive(Args)]
struct RunArgs {
    /// path to the JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// output directory (overrides config out_dir and CORDES_OUT)
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads for row-parallel experiments (reserved; runs are
    /// deterministic regardless)
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn out_dir(args: &RunArgs, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    if let Ok(env) = std::env::var("CORDES_OUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    cfg.out_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(args: &RunArgs) -> ExitCode {
    if args.workers == 0 {
        eprintln!("config error in field `workers`: must be at least 1");
        return ExitCode::from(2);
    }
    let cfg = match ExperimentConfig::from_path(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    let t0 = Instant::now();
    let outcome = match run_experiment(&cfg) {
        Ok(outcome) => outcome,
        Err(e @ CordesError::Config { .. }) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("experiment `{}` failed: {e}", cfg.experiment);
            return ExitCode::from(1);
        }
    };
    let dir = out_dir(args, &cfg);
    let summary_path = match write_outputs(&cfg, &outcome, &dir, t0.elapsed().as_millis()) {
        Ok(path) => path,
        Err(e) => {
            eprintln!("failed to write outputs: {e}");
            return ExitCode::from(1);
        }
    };
    println!("{}", summary_path.display());
    if outcome.all_pass() {
        ExitCode::SUCCESS
    } else {
        let failing = outcome
            .first_failure()
            .expect("at least one failing assertion");
        eprintln!(
            "assertion `{}` failed: value {:e} vs tolerance {:e}",
            failing.name, failing.value, failing.tolerance
        );
        ExitCode::from(1)
    }
}

fn list(json: bool) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&EXPERIMENTS.to_vec()).expect("registry serializes")
        );
        return;
    }
    println!(
        "{:<22} {:<28} {:<12} description",
        "experiment", "config keys", "runtime"
    );
    for e in &EXPERIMENTS {
        println!(
            "{:<22} {:<28} {:<12} {}",
            e.name, e.config_keys, e.expected_runtime, e.description
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(&args),
        Command::List { json } => {
            list(json);
            ExitCode::SUCCESS
        }
        Command::Schema => {
            println!(
                "{}",
                serde_json::to_string_pretty(&config_schema()).expect("schema serializes")
            );
            ExitCode::SUCCESS
        }
    }
}
