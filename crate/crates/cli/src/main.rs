use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rayvox_cli::{
    cmd_eval, cmd_gen_data, cmd_handover, cmd_restore, cmd_suite, cmd_train, exit_code, load_config, BackendChoice,
    ScenarioSource,
};
use rayvox_core::datagen::Split;
use rayvox_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rayvox", version, about = "Hand-aware depth restoration for hand-held transparent objects")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Oracle,
    Passthrough,
    Checkpoint,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    GenData {
        /// Run configuration (JSON); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a generated dataset.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Restored vs corrupted-input metrics of a checkpoint.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Restore one scene directory and dump its point cloud.
    Restore {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dump only restored object points (background removed).
        #[arg(long)]
        masked: bool,
    },
    /// Run the simulated handover benchmark.
    Handover {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        backend: BackendArg,
        /// Checkpoint directory for the checkpoint backend.
        #[arg(long, required_if_eq("backend", "checkpoint"))]
        checkpoint: Option<PathBuf>,
        /// Scenario file; the built-in suite when omitted.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Seed of the built-in suite.
        #[arg(long, default_value_t = 0)]
        suite_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the built-in scenario suite to a file.
    Suite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::GenData { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let m = cmd_gen_data(&cfg, &out)?;
            println!(
                "wrote {} scenes (train {}, val {}, test {}) to {}",
                m.scenes.len(),
                m.splits.train,
                m.splits.val,
                m.splits.test,
                out.display()
            );
        }
        Command::Train { config, data, out } => {
            let cfg = load_config(config.as_deref())?;
            let s = cmd_train(&cfg, &data, &out, |e| {
                let val = e.val.map(|v| format!(" val_rmse {:.5}", v.rmse)).unwrap_or_default();
                eprintln!("epoch {:>3} loss {:.5} steps {}{val}", e.epoch, e.loss, e.steps);
            })?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Eval { config, checkpoint, data, split, out } => {
            let cfg = load_config(config.as_deref())?;
            let split = match split {
                SplitArg::Train => Some(Split::Train),
                SplitArg::Val => Some(Split::Val),
                SplitArg::Test => Some(Split::Test),
                SplitArg::All => None,
            };
            let r = cmd_eval(&cfg, &checkpoint, &data, split)?;
            let json = serde_json::to_string_pretty(&r)?;
            if let Some(p) = out {
                std::fs::write(&p, json.clone() + "\n").map_err(|e| Error::Io { path: p, source: e })?;
            }
            println!("{json}");
            print!("{}", r.table());
        }
        Command::Restore { checkpoint, scene, out, masked } => {
            let s = cmd_restore(&checkpoint, &scene, &out, masked)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Handover { config, backend, checkpoint, scenarios, suite_seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let backend = match backend {
                BackendArg::Oracle => BackendChoice::Oracle,
                BackendArg::Passthrough => BackendChoice::Passthrough,
                BackendArg::Checkpoint => BackendChoice::Checkpoint(checkpoint.expect("required by clap")),
            };
            let source = scenarios.map_or(ScenarioSource::Suite(suite_seed), ScenarioSource::File);
            let r = cmd_handover(&cfg, &backend, &source, &out)?;
            print!("{}", r.report.table());
        }
        Command::Suite { seed, out } => {
            let n = cmd_suite(seed, &out)?;
            println!("wrote {n} scenarios to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
