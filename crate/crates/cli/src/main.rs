mod args;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::Cli;
use commands::{Status, UsageError};
use output::Outputs;

fn main() -> ExitCode {
    match real_main() {
        Ok(Status::Passed) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn real_main() -> Result<Status> {
    let mut argv: Vec<_> = std::env::args_os().collect();
    if let Some(c) = config::config_path(&argv) {
        argv = config::merge(argv, &PathBuf::from(c)).map_err(|e| UsageError(format!("{e:#}")))?;
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            // help and version land here too
            e.exit();
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(UsageError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let dir = cli
        .out_dir
        .or_else(|| std::env::var_os("EXMP_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut out = Outputs::new(dir, commands::command_name(&cli.command), &argv);
    let status = commands::run(cli.command, &mut out)?;
    out.finish()?;
    Ok(status)
}

/// 2 for bad input, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    use exmp_core::Error as E;
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<E>() {
        Some(
            E::TimeOutOfRange { .. }
            | E::InvalidArgument(_)
            | E::Dimension { .. }
            | E::NotSimplex(_)
            | E::NotStochastic(_)
            | E::NotGenerator(_)
            | E::NonFinite(_)
            | E::Parse(_),
        ) => 2,
        _ => 1,
    }
}
