use std::process::ExitCode;

use clap::Parser;
use fbs_cli::{Cli, Status};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() {
                Status::Usage
            } else {
                Status::Success
            };
            let _ = e.print();
            return ExitCode::from(status.code() as u8);
        }
    };
    match fbs_cli::run(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Usage.code() as u8)
        }
    }
}
