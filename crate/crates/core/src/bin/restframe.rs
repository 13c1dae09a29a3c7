use std::process::ExitCode;

use clap::Parser;
use restframe::cli::{error_exit_code, run, Args};

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(report) => {
            for check in &report.checks {
                eprintln!(
                    "{} {:<32} {:>12.4e} (threshold {:.1e})",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.value,
                    check.threshold
                );
            }
            match serde_json::to_string_pretty(&report) {
                Ok(json) => println!("{json}"),
                Err(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e))
        }
    }
}
