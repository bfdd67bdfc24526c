use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "tsqp", version, about = "Run and compare SQP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration file.
    Run { config: PathBuf },
    /// Compare two history files side by side.
    Compare { a: PathBuf, b: PathBuf },
}

fn main() {
    let code = match Cli::parse().command {
        Command::Run { config } => tsqp::run(&config),
        Command::Compare { a, b } => tsqp::run_compare(&a, &b),
    };
    std::process::exit(code);
}
