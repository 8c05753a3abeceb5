use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(nehari_lab::cli::run(std::env::args_os()))
}
