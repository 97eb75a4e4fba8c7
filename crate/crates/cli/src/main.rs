use std::process::ExitCode;

use clap::Parser;
use comvar_cli::args::{Cli, Command};
use comvar_cli::commands;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::MetricCompare(a) => commands::cmd_metric_compare(a),
        Command::Pendulum(a) => commands::cmd_pendulum(a),
        Command::Icons(a) => commands::cmd_icons(a),
        Command::Embed(a) => commands::cmd_embed(a),
    };
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            println!("manifest: {}", outcome.manifest_path.display());
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
