use std::process::ExitCode;

use clap::Parser;
use robustlrt::cli::{error_payload, exit_code, run, Args};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = Args::parse().into_config().and_then(|config| run(&config, std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`| head`) is not a failure.
        Err(err) if err.is_broken_pipe() => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            eprintln!("{}", error_payload(&err));
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
