use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(x2static_cli::run(std::env::args_os()))
}
