mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ReconstructArgs, UsageError};
use config::{ConfigError, LoadedConfig};

/// Forward transport solves and source reconstruction on the unit disk.
#[derive(Parser, Debug)]
#[command(name = "rte-inverse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `run.out` from the config, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the optional data noise; defaults to `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the forward problem and write outgoing boundary data.
    Forward {
        #[command(flatten)]
        common: Common,
    },
    /// Recover sources from boundary data.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// solenoidal, divfree, twodata or remark.
        #[arg(long)]
        variant: Option<String>,
        /// Outgoing boundary data (CSV from `forward`).
        #[arg(long)]
        data: PathBuf,
        /// Data of the isotropic part alone (twodata).
        #[arg(long)]
        data2: Option<PathBuf>,
        /// Ignore the config source; no error metrics are reported.
        #[arg(long)]
        blind: bool,
    },
    /// Build the gauge partner of the config source and compare forward data.
    Gauge {
        #[command(flatten)]
        common: Common,
    },
    /// Error against resolution over grid refinements.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        levels: u32,
    },
    /// Quick internal consistency checks.
    Selftest,
}

/// Environment variable setting the worker thread count.
const THREADS_VAR: &str = "RTE_THREADS";

fn exit_code(err: &anyhow::Error) -> u8 {
    use rte_inverse::Error as E;
    if err.downcast_ref::<ConfigError>().is_some() || err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(E::Parse(_) | E::InvalidArgument(_) | E::GridMismatch(_)) => 2,
        Some(E::Diverged { .. }) => 3,
        Some(E::DataConsistency { .. }) => 4,
        Some(E::Precondition(_) | E::NotSubcritical { .. } | E::HAccuracy { .. }) => 5,
        _ => 1,
    }
}

fn setup_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().map_err(|_| {
            UsageError(format!(
                "{THREADS_VAR} must be a positive integer, got `{v}`"
            ))
        })?;
        if n == 0 {
            return Err(UsageError(format!("{THREADS_VAR} must be positive")).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn load(common: &Common, command: &str) -> anyhow::Result<(LoadedConfig, PathBuf, u64)> {
    let cfg = LoadedConfig::from_path(&common.config)?;
    if let Some(c) = &cfg.config.run.command {
        if c != command {
            eprintln!("warning: config run.command is `{c}` but `{command}` was invoked");
        }
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.config.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = common.seed.unwrap_or(cfg.config.run.seed);
    Ok((cfg, out, seed))
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    setup_threads()?;
    match cli.command {
        Command::Forward { common } => {
            let (cfg, out, _) = load(&common, "forward")?;
            commands::forward(&cfg, &out)?;
        }
        Command::Reconstruct {
            common,
            variant,
            data,
            data2,
            blind,
        } => {
            let (cfg, out, seed) = load(&common, "reconstruct")?;
            let args = ReconstructArgs {
                variant: variant.as_deref(),
                data: &data,
                data2: data2.as_deref(),
                seed,
                blind,
            };
            commands::reconstruct(&cfg, &out, args)?;
        }
        Command::Gauge { common } => {
            let (cfg, out, _) = load(&common, "gauge")?;
            commands::gauge(&cfg, &out)?;
        }
        Command::Convergence { common, levels } => {
            let (cfg, out, seed) = load(&common, "convergence")?;
            commands::convergence(&cfg, &out, levels, seed)?;
        }
        Command::Selftest => {
            let failures = commands::selftest()?;
            if failures > 0 {
                eprintln!("selftest: {failures} check(s) failed");
                return Ok(1);
            }
            println!("selftest: all checks passed");
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
