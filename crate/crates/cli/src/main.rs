mod args;
mod commands;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use cphase_core::Error;
use serde::Serialize;

use args::{Cli, Command, Common};

/// Process exit codes.
const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_RESOLUTION: u8 = 3;

enum Failure {
    Core(Error),
    Io(std::io::Error),
    Verify(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Everything that determines the output, defaults included.
#[derive(Serialize)]
struct Echo<'a> {
    version: &'static str,
    command: &'a Command,
    #[serde(flatten)]
    common: Common,
    order: usize,
}

fn emit<R: Serialize>(cli: &Cli, path: &Path, rows: &[R]) -> std::io::Result<()> {
    let mut common = cli.common.clone();
    common.output = Some(path.to_path_buf());
    let echo = Echo {
        version: env!("CARGO_PKG_VERSION"),
        command: &cli.command,
        common,
        order: cphase_core::spectral::GridSpec::default().order,
    };
    output::write_rows(path, cli.common.format, &echo, rows)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let c = &cli.common;
    let path = c.output_path(cli.command.name());
    match &cli.command {
        Command::Sweep { delta_min, delta_max, points } => {
            emit(cli, &path, &commands::sweep(c, *delta_min, *delta_max, *points)?)?;
        }
        Command::Metrics { delta } => emit(cli, &path, &commands::metrics(c, *delta)?)?,
        Command::Purity { delta, stage } => emit(cli, &path, &commands::purity(c, *delta, *stage)?)?,
        Command::Cascade { delta, steps, pmp } => {
            let (rows, traces) = commands::cascade(c, *delta, *steps, *pmp)?;
            for t in &traces {
                let fit = t.infidelity_fit(1, *steps)?;
                println!("pmp {}: infidelity exponent {:.4}, final fidelity {:.6}", t.pmp, fit.exponent, t.steps.last().map_or(f64::NAN, |s| s.fidelity));
            }
            emit(cli, &path, &rows)?;
        }
        Command::Optimize { n } => emit(cli, &path, &commands::optimize(n)?)?,
        Command::PmpLoad { ratio_min, ratio_max, points, cavity_detuning } => {
            emit(cli, &path, &commands::pmp_load(c, *ratio_min, *ratio_max, *points, *cavity_detuning)?)?;
        }
        Command::Verify => {
            let rows = commands::verify(c.seed);
            for r in &rows {
                println!("{} {}: {:.3e} (limit {:.1e})", if r.passed { "PASS" } else { "FAIL" }, r.check, r.value, r.limit);
            }
            emit(cli, &path, &rows)?;
            let failed = rows.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(Failure::Verify(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::ResolutionInsufficient { .. } => EXIT_RESOLUTION,
                _ => EXIT_INVALID,
            })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(Failure::Verify(n)) => {
            eprintln!("{n} check(s) failed");
            ExitCode::from(EXIT_VERIFY_FAILED)
        }
    }
}
