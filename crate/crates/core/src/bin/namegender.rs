use std::process::ExitCode;

fn main() -> ExitCode {
    namegender::cli::main_with_args(std::env::args_os())
}
