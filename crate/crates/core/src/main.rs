use std::process::ExitCode;

fn main() -> ExitCode {
    essc::cli::main_with_args(std::env::args_os().collect())
}
