use std::process::ExitCode;

use cavfb_cli::{configure_threads, run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(&cli));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cavfb {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
