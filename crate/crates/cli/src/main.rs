mod args;
mod commands;
mod output;

use args::{Cli, Command};
use clap::error::ErrorKind;
use clap::Parser;
use std::process::ExitCode;

fn run(cli: &Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Partition(a) => commands::partition(a),
        Command::Indices(a) => commands::indices(a),
        Command::FitIbpa(a) => commands::fit_ibpa_cmd(a),
        Command::FitTsbpa(a) => commands::fit_tsbpa_cmd(a),
        Command::TestKs(a) => commands::test_ks(a),
        Command::Pspdt(a) => commands::pspdt_cmd(a),
        Command::Colonius(a) => commands::colonius(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Pipeline(a) => commands::pipeline(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", output::error_json(&e));
            ExitCode::from(1)
        }
    }
}
