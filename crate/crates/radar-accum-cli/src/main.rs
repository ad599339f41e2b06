use std::process::ExitCode;

use clap::Parser;
use radar_accum_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    run(&cli.command)
}
