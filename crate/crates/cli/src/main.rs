//! `focusmix` command-line entry point.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure. Errors
//! are reported as a single `error: <class>: <message>` line on stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "focusmix", version, about = "Mixture-model multiple imputation with focused clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one chain and write m completed datasets.
    Impute(RunArgs),
    /// Pool cell proportions over completed datasets with Rubin's rules.
    Pool(PoolArgs),
    /// Run the factorial simulation study.
    Simulate(SimulateArgs),
    /// Posterior predictive checks from replicated datasets.
    Ppc(RunArgs),
    /// Check a schema, configuration and data file without sampling.
    Validate(ValidateArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Mmfc,
    Mmmix,
}

impl From<ModelArg> for focusmix::Variant {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Mmfc => focusmix::Variant::MmFc,
            ModelArg::Mmmix => focusmix::Variant::MmMix,
        }
    }
}

/// Overrides shared by the sampling commands.
#[derive(Args, Debug, Clone, Default)]
struct ChainArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Run configuration (JSON); defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args, Debug)]
struct PoolArgs {
    #[arg(long)]
    schema: PathBuf,
    /// Completed datasets: CSV files, or a directory holding imp_<k>.csv.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Output directory for pooled.csv and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Run configuration supplying `cells` and `level`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cell such as `y=1,x=2` or `y=1|x=2`; repeatable. All marginals when absent.
    #[arg(long = "cell")]
    cells: Vec<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    /// Study configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict the study to one model.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let body: Vec<&str> = text.lines().take_while(|l| !l.starts_with("Usage:")).collect();
            eprintln!("error: usage: {}", one_line(body.join(" ").trim_start_matches("error: ")));
            return ExitCode::from(1);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (class, code) = if e.is_validation() { ("validation", 1) } else { ("runtime", 2) };
            eprintln!("error: {class}: {}", one_line(&e.to_string()));
            ExitCode::from(code)
        }
    }
}
