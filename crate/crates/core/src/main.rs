use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simfolio::cli::{error_json, run, Command};
use simfolio::config::{schema, RunConfig};

#[derive(Parser)]
#[command(
    name = "simfolio",
    version,
    about = "Monte Carlo portfolio optimization, backtesting and policy search",
    after_help = "Every configuration key, its default and its meaning: `simfolio config-schema`."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a market and backtest on it
    Simulate(RunArgs),
    /// Optimize weights at the last date of the data
    Optimize(RunArgs),
    /// Rolling out-of-sample backtest
    Backtest(RunArgs),
    /// Equity-curve error versus sample count
    Stability(RunArgs),
    /// Search a piecewise-affine policy for a toy decision process
    PolicySearch(RunArgs),
    /// Print every configuration key with its default
    ConfigSchema,
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON configuration; omitted keys take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configuration's seed
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(command: Command, args: &RunArgs) -> simfolio::Result<()> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    run(command, &config, &args.out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Optimize(a) => (Command::Optimize, a),
        Cmd::Backtest(a) => (Command::Backtest, a),
        Cmd::Stability(a) => (Command::Stability, a),
        Cmd::PolicySearch(a) => (Command::PolicySearch, a),
        Cmd::ConfigSchema => {
            let text = serde_json::to_string_pretty(&schema()).expect("schema serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
            return ExitCode::SUCCESS;
        }
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
