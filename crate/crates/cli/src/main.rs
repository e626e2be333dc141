use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use sunprobit::run::failure_report;
use sunprobit::{run, Cli, RunConfig, RunError};

fn main() -> ExitCode {
    let config = match RunConfig::from_cli(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    match run(&config, &mut stdout, &mut stderr) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if let RunError::Numerical(_) = e {
                let report = failure_report(&config, &e);
                let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&report).expect("reports serialise"));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
