use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use symflag_cli::{execute, write_outputs, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let mut outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    outcome.report.timing.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    for row in &outcome.report.rows {
        println!("{}", row.line());
    }
    match write_outputs(&cli, &outcome) {
        Ok(path) => println!("report: {}", path.display()),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if outcome.report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
