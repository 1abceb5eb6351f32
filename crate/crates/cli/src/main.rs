use std::process::ExitCode;

use cgdist_cli::{execute, Cli};
use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            return ExitCode::from(code);
        }
    };
    ExitCode::from(execute(cli, &mut std::io::stderr()))
}
