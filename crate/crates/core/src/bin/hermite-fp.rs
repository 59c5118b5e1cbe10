use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hermite_fp::config::{parse_config, Command};
use hermite_fp::run::{exit_code, run};
use hermite_fp::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    SolveLinear,
    SolveMckean,
    SelfConsistency,
    Bifurcate,
    Mc,
    Zeta,
    CriticalEpsilon,
    Compare,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::SolveLinear => Command::SolveLinear,
            Cmd::SolveMckean => Command::SolveMckean,
            Cmd::SelfConsistency => Command::SelfConsistency,
            Cmd::Bifurcate => Command::Bifurcate,
            Cmd::Mc => Command::Mc,
            Cmd::Zeta => Command::Zeta,
            Cmd::CriticalEpsilon => Command::CriticalEpsilon,
            Cmd::Compare => Command::Compare,
        }
    }
}

/// Hermite spectral solvers for mean-field Fokker-Planck equations.
///
/// Exit codes: 0 success, 2 invalid configuration, 3 solver failure, 4 I/O error.
#[derive(Parser, Debug)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// TOML run configuration (optional for `zeta`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed, overriding `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text, cli.command.into())?;
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    let report = run(&cfg)?;
    for line in &report.stdout {
        println!("{line}");
    }
    for path in &report.artifacts {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}
