use std::process::ExitCode;

fn main() -> ExitCode {
    butterfly_stft::cli::main_with_args(std::env::args_os())
}
