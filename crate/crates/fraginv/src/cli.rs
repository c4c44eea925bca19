//! Command-line surface.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{CommandFactory, Parser, Subcommand};
use fraginv_core::{BenchmarkCase, BenchmarkId, Scheme};

use crate::commands::{self, output_root, CmdResult, CommandError, OUT_ENV};
use crate::config::{parse_config, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "fraginv", version, about = "Fragmentation equation solver and initial-datum reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output root (overrides FRAGINV_OUT and `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Forward scheme, overriding the configuration.
    #[arg(long, global = true, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,

    /// Seed for random directions, overriding `optimizer.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate forward; writes solution.csv and moments.csv.
    Forward,
    /// Reconstruct the initial datum; writes history.csv, reconstruction.csv, final_state.csv.
    Invert,
    /// Taylor remainder test of the gradient; writes taylor.csv.
    Taylor,
    /// Run a built-in benchmark (test1 or test2) with its default parameters.
    Bench {
        case: String,
        /// fvs or wfvs; both run in parallel when omitted.
        #[arg(value_name = "SCHEME")]
        which: Option<String>,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: fraginv_core::Error| e.to_string())
}

fn usage_error(message: String) -> CommandError {
    let usage = Cli::command().render_usage();
    CommandError::Usage(format!("{message}\n\n{usage}"))
}

fn load(cli: &Cli) -> CmdResult<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| usage_error("this command needs --config PATH".into()))?;
    let mut config = parse_config(path)?;
    if let Some(s) = cli.scheme {
        config.scheme = s;
    }
    if let Some(seed) = cli.seed {
        config.optimizer.seed = seed;
    }
    Ok(config)
}

fn root(cli: &Cli, config_dir: Option<&Path>) -> PathBuf {
    let env = std::env::var(OUT_ENV).ok();
    output_root(cli.out.as_deref(), env.as_deref(), config_dir)
}

fn bench_schemes(cli: &Cli, positional: Option<&str>) -> CmdResult<Vec<Scheme>> {
    let positional = positional.map(parse_scheme).transpose().map_err(usage_error)?;
    match (positional, cli.scheme) {
        (Some(a), Some(b)) if a != b => Err(usage_error(format!(
            "conflicting schemes `{}` and `--scheme {}`",
            a.name(),
            b.name()
        ))),
        (Some(s), _) | (None, Some(s)) => Ok(vec![s]),
        (None, None) => Ok(vec![Scheme::Fvs, Scheme::Wfvs]),
    }
}

fn dispatch(cli: &Cli) -> CmdResult<Vec<PathBuf>> {
    let bundle = match &cli.command {
        Command::Forward => {
            let c = load(cli)?;
            commands::cmd_forward(&c, &root(cli, c.output_dir.as_deref()))?.1
        }
        Command::Invert => {
            let c = load(cli)?;
            commands::cmd_invert(&c, &root(cli, c.output_dir.as_deref()))?.1
        }
        Command::Taylor => {
            let c = load(cli)?;
            commands::cmd_taylor(&c, &root(cli, c.output_dir.as_deref()))?.1
        }
        Command::Bench { case, which } => {
            let id: BenchmarkId = case.parse().map_err(|e: fraginv_core::Error| usage_error(e.to_string()))?;
            let schemes = bench_schemes(cli, which.as_deref())?;
            commands::cmd_bench(BenchmarkCase::from_id(id), &schemes, &root(cli, None))?.1
        }
    };
    Ok(bundle.files().to_vec())
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let started = Instant::now();
    match dispatch(cli) {
        Ok(files) => {
            for f in &files {
                log::debug!("wrote {}", f.display());
            }
            log::info!("done in {:.3} s ({} files)", started.elapsed().as_secs_f64(), files.len());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
