use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use tipctl::cli::{run, Cli};

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> anyhow::Result<()> {
    let argv = tipctl::config::apply_config(std::env::args_os().collect(), &Cli::command())?;
    let cli = Cli::parse_from(argv);
    let report = run(&cli)?;
    for line in &report.summary {
        println!("{line}");
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
