use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use recurlab::classify::Thresholds;
use recurlab::natset::{summarize, FiniteNatSet};
use recurlab_cli::{classify_single, emit_report, load_config, run_experiment, CliError, Format, TOOL_VERSION};

#[derive(Parser)]
#[command(name = "recurlab", version, about = "Recurrence experiments for finite-dimensional linear operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: OutFormat,
        /// Exit with status 3 if any check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Density statistics of an integer set given as JSON.
    Densities {
        #[arg(long)]
        set: PathBuf,
        /// Banach window lengths.
        #[arg(long, value_delimiter = ',', default_values_t = [10u64, 100, 1000])]
        windows: Vec<u64>,
        #[arg(long, default_value_t = 20)]
        profile: usize,
    },
    /// Classify one vector under one operator.
    Classify {
        /// Operator spec (JSON file).
        #[arg(long)]
        op: PathBuf,
        /// JSON coordinates or a generator such as `basis:0`.
        #[arg(long)]
        vector: String,
        /// Comma-separated radii; the default grid when omitted.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long)]
        horizon: u64,
        #[arg(long)]
        min_horizon: Option<u64>,
    },
    /// Print the tool version.
    Version,
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, format, strict } => {
            let loaded = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let doc = run_experiment(&loaded);
            let format = match format {
                OutFormat::Json => Format::Json,
                OutFormat::Csv => Format::Csv,
            };
            if let Err(e) = emit_report(&doc, format, &out) {
                return fail(e);
            }
            if strict && !doc.all_passed() {
                eprintln!("error: at least one check did not pass");
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Command::Densities { set, windows, profile } => {
            let text = match std::fs::read_to_string(&set) {
                Ok(t) => t,
                Err(source) => return fail(CliError::Io { path: set, source }),
            };
            let a: FiniteNatSet = match serde_json::from_str(&text) {
                Ok(a) => a,
                Err(e) => {
                    return fail(CliError::Parse { path: set, line: e.line(), column: e.column(), message: e.to_string() })
                }
            };
            let windows: Vec<u64> = windows.into_iter().filter(|&n| n <= a.horizon()).collect();
            match summarize(&a, &windows, profile) {
                Ok(s) => {
                    println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(CliError::Validation(e.to_string())),
            }
        }
        Command::Classify { op, vector, eps, horizon, min_horizon } => {
            let mut th = Thresholds::default();
            if let Some(m) = min_horizon {
                th.min_horizon = m;
            }
            match classify_single(&op, &vector, &eps, horizon, &th) {
                Ok(r) => {
                    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Version => {
            println!("recurlab {TOOL_VERSION}");
            ExitCode::SUCCESS
        }
    }
}
