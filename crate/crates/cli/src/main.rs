use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hbm::{output::json_bytes, CliError, ExperimentConfig, RunOptions};

/// Experiments on hyperbolic Brownian motion: heat kernels, deviations of
/// the radial part and hitting probabilities.
#[derive(Debug, Parser)]
#[command(name = "hbm", version)]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Directory for reports; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// List the violations in a config without running it.
    Validate { config: PathBuf },
    /// Print the output layout of an experiment.
    Schema { experiment: String },
}

fn print_json(v: &serde_json::Value) {
    print!("{}", String::from_utf8_lossy(&json_bytes(v)));
}

fn fail(e: &CliError) -> ExitCode {
    eprint!("{}", String::from_utf8_lossy(&json_bytes(&e.report())));
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let opts = RunOptions { workers: cli.workers, output_dir: cli.output_dir };
            match ExperimentConfig::load(&config).and_then(|c| hbm::run(&c, &opts)) {
                Ok(m) => {
                    print_json(&m.to_json());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(c) => {
                let v = hbm::validate(&c);
                print_json(&serde_json::json!({ "violations": v }));
                if v.is_empty() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
            Err(e) => fail(&e),
        },
        Command::Schema { experiment } => match hbm::report_schema(&experiment) {
            Ok(s) => {
                print_json(&serde_json::to_value(s).expect("schema serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
