use std::process::ExitCode;

fn main() -> ExitCode {
    lse_cli::run(std::env::args_os())
}
