use std::process::ExitCode;

use clap::Parser;
use mrdmd_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            if !text.is_empty() {
                println!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(if e.kind() == "config" { 2 } else { 1 })
        }
    }
}
