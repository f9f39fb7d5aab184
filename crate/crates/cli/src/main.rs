use std::process::ExitCode;

fn main() -> ExitCode {
    gammabt_cli::run(std::env::args_os())
}
