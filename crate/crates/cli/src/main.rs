use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(radiomap_cli::run(std::env::args_os()))
}
