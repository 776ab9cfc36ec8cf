//! `dmrc`: runs the scheduling simulator from a JSON config and writes CSVs.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmrc_core::Policy;

#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit code 1.
    Config(String),
    /// The simulation or an output write failed: exit code 2.
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<dmrc_core::Error> for CliError {
    fn from(e: dmrc_core::Error) -> Self {
        match e {
            dmrc_core::Error::Config { .. } | dmrc_core::Error::Parse { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dmrc", version, about = "Online observation, compression and downlink scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config; the desk defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds, e.g. `1,2,3` or `1..5`.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<List<u64>>,
    /// Output directory (overrides `output_dir` and DMRC_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One run per seed with one policy; per-slot and summary CSVs.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<Policy>,
    },
    /// Average utility and backlog for each control factor V.
    SweepV {
        #[command(flatten)]
        common: Common,
        /// Comma separated, e.g. `1000,2000,8000`.
        #[arg(long, value_parser = parse_floats)]
        v_list: Option<List<f64>>,
    },
    /// All three policies on shared channels.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Data series for the evaluation plots.
    Figures {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_floats)]
        v_list: Option<List<f64>>,
        /// EOS counts for the per-EOS series.
        #[arg(long, value_parser = parse_usizes, default_value = "4,6,8,10,12")]
        k_list: List<usize>,
        /// Transceivers per destination.
        #[arg(long, value_parser = parse_usizes, default_value = "1,2,3,4")]
        m_list: List<usize>,
        /// Per-flow rate floors.
        #[arg(long, value_parser = parse_floats, default_value = "0,20,40,60")]
        floor_list: List<f64>,
    },
}

/// A comma separated flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse().map_err(|e: dmrc_core::Error| e.to_string())
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<List<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()
        .map(List)
}

fn parse_floats(s: &str) -> Result<List<f64>, String> {
    parse_list(s)
}

fn parse_usizes(s: &str) -> Result<List<usize>, String> {
    parse_list(s)
}

fn parse_seeds(s: &str) -> Result<List<u64>, String> {
    let mut seeds = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|e| format!("`{part}`: {e}"))?;
            let b: u64 = b.trim().parse().map_err(|e| format!("`{part}`: {e}"))?;
            if b < a {
                return Err(format!("`{part}`: empty range"));
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|e| format!("`{part}`: {e}"))?);
        }
    }
    Ok(List(seeds))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
