use std::process::ExitCode;

fn main() -> ExitCode {
    hpnet::cli::run(std::env::args_os())
}
