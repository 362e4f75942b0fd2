use std::process::ExitCode;

use clap::Parser;
use operc_cli::{execute, render, resolve, write_outputs, Cli, CliError, EXIT_INVARIANT};

fn run(cli: &Cli) -> Result<i32, CliError> {
    let env_seed = std::env::var("OPERC_SEED").ok();
    let cfg = resolve(cli, env_seed.as_deref())?;
    let out = execute(cli.command, &cfg)?;
    match &cfg.out {
        Some(dir) => {
            for line in &out.table.summary {
                println!("{line}");
            }
            for f in write_outputs(&out.table, dir, cfg.format)? {
                println!("wrote {}", f.display());
            }
        }
        None => {
            for line in &out.table.summary {
                eprintln!("{line}");
            }
            print!("{}", render(&out.table, cfg.format));
        }
    }
    if let Some(msg) = &out.invariant_failure {
        eprintln!("{}", serde_json::json!({ "error": "invariant", "message": msg }));
        return Ok(EXIT_INVARIANT);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
