//! `boselab`: scattering tables, operator builds, ground states, the renormalization
//! pipeline and the verification suite, driven by a TOML config.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 a verification check
//! failed, 3 a solver did not converge or missed its tolerance.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use boselab::Error;
use clap::{Parser, Subcommand};

use commands::ChecksFailed;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "boselab", version, about = "Truncated Fock-space laboratory for the dilute Bose gas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Byte-identical output across runs; omits timing files.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads for the numerical kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides `run.output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scattering length, Neumann eigenvalue and the η table.
    Scatter,
    /// Operator statistics, optionally with triplet dumps.
    Build {
        #[arg(long)]
        dump: bool,
    },
    /// Ground state of H_N on the full basis.
    Ground {
        #[arg(long)]
        dump: bool,
    },
    /// Dense L → G → J → M chain.
    Pipeline,
    /// All verification suites; writes checks.json.
    Verify,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ChecksFailed>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NonConvergence(_) | Error::Tolerance(_) | Error::NotHermitian(_) | Error::NotAntiHermitian(_)) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let Some(path) = &cli.config else {
        anyhow::bail!("no configuration given; pass --config PATH");
    };
    let mut cfg = RunConfig::load(path)?;
    if cli.deterministic {
        cfg.run.deterministic = true;
    }
    if let Some(out) = cli.out {
        cfg.run.output_dir = out;
    }
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global()?;
    }
    let out = cfg.run.output_dir.clone();
    std::fs::create_dir_all(&out)?;
    match cli.command {
        Command::Scatter => commands::scatter(&cfg, &out),
        Command::Build { dump } => commands::build(&cfg, &out, dump),
        Command::Ground { dump } => commands::ground(&cfg, &out, dump),
        Command::Pipeline => commands::pipeline(&cfg, &out),
        Command::Verify => commands::verify(&cfg, &out).map(|checks| {
            eprintln!("{} checks passed", checks.len());
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
