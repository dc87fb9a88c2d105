use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use tumorlim::limit::SweepKind;
use tumorlim_cli::{Config, RunManifest};

/// Simulate the two-population tumor model and audit its incompressible limit.
///
/// Log verbosity is read from `TUMORLIM_LOG` (e.g. `info`, `debug`).
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Kappa,
    Eps,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a κ- or ε-sweep.
    Sweep {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recheck an output directory without rerunning the solver.
    Verify {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print the default configuration.
    EmitDefaults,
}

fn report(m: &RunManifest) -> ExitCode {
    for c in &m.checks {
        println!(
            "{} {}: {:e} (tolerance {:e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    if m.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TUMORLIM_LOG", "warn")).init();
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Simulate { config, out } => {
            let cfg = Config::load(&config)?;
            Ok(report(&tumorlim_cli::simulate(&cfg, &out)?))
        }
        Command::Sweep { kind, config, out } => {
            let cfg = Config::load(&config)?;
            let kind = match kind {
                Kind::Kappa => SweepKind::Kappa,
                Kind::Eps => SweepKind::Eps,
            };
            Ok(report(&tumorlim_cli::sweep(&cfg, kind, &out)?))
        }
        Command::Verify { dir } => match tumorlim_cli::verify(&dir) {
            Ok(r) => {
                println!("ok: {} director(ies), checks {}", r.directories, r.checks.join(", "));
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => {
                eprintln!("verify failed: {e}");
                Ok(ExitCode::FAILURE)
            }
        },
        Command::EmitDefaults => {
            print!("{}", Config::default().to_toml());
            Ok(ExitCode::SUCCESS)
        }
    }
}
