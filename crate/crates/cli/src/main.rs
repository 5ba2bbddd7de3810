use std::io;
use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    // `-v` raises the default log level; RUST_LOG still wins.
    let verbose = qfuscate_cli::Cli::try_parse().map_or(0, |c| c.verbose);
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let code = qfuscate_cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code as u8)
}
