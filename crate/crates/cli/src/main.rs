//! `dimlab`: run an experiment config or the verification battery.
//!
//! ```text
//! dimlab <simulate|id|rd|rdd> --config path.json [--key.path=value ...]
//! dimlab verify [--quick] [--seed N] [--output-dir DIR]
//! ```
//!
//! Exit status is 0 on success, 1 on an invalid config and 2 on numerical
//! failure. `DIMLAB_THREADS` caps worker threads.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dimlab_core::config::apply_overrides;
use dimlab_core::verify::DEFAULT_VERIFY_SEED;
use dimlab_core::{run, Error, ExperimentConfig, RunOutcome, Task};

#[derive(Parser)]
#[command(
    name = "dimlab",
    version,
    about = "Information and rate-distortion dimension workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample path.
    Simulate(TaskArgs),
    /// Estimate the information dimension from a conditional-entropy sweep.
    Id(TaskArgs),
    /// Trace a rate-distortion curve with Blahut–Arimoto.
    Rd(TaskArgs),
    /// Fit the rate-distortion dimension.
    Rdd(TaskArgs),
    /// Run the verification battery.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct TaskArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path overrides such as `--spec.p=0.2` or `seed=3`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Reduced sample sizes and solver budgets.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = DEFAULT_VERIFY_SEED)]
    seed: u64,
    #[arg(long, default_value = "dimlab_out")]
    output_dir: PathBuf,
}

fn load(task: Task, args: &TaskArgs) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: malformed JSON: {e}", args.config.display())))?;
    apply_overrides(&mut value, &args.overrides)?;
    // The subcommand names the task; a config may omit it or must agree.
    match value.get("task").and_then(|t| t.as_str()) {
        None => {
            value["task"] = serde_json::Value::String(task.name().to_string());
        }
        Some(t) if t != task.name() => {
            return Err(Error::Config(format!(
                "config task `{t}` does not match subcommand `{}`",
                task.name()
            )));
        }
        _ => {}
    }
    ExperimentConfig::from_value(value)
}

fn report(outcome: &RunOutcome) -> ExitCode {
    for line in &outcome.summaries {
        if line.starts_with("error:") {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
    for path in &outcome.artifacts {
        println!("wrote {}", path.display());
    }
    ExitCode::from(outcome.exit_code as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (task, args) = match cli.command {
        Command::Simulate(a) => (Task::Simulate, a),
        Command::Id(a) => (Task::Id, a),
        Command::Rd(a) => (Task::Rd, a),
        Command::Rdd(a) => (Task::Rdd, a),
        Command::Verify(v) => {
            let mut cfg = ExperimentConfig::new(Task::Verify);
            cfg.seed = v.seed;
            cfg.quick = v.quick;
            cfg.output_dir = v.output_dir;
            let start = Instant::now();
            let outcome = run(&cfg);
            for t in &outcome.timings {
                println!("timing {} {:.2}s", t.group, t.seconds);
            }
            println!("timing total {:.2}s", start.elapsed().as_secs_f64());
            return report(&outcome);
        }
    };
    match load(task, &args) {
        Ok(cfg) => report(&run(&cfg)),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
