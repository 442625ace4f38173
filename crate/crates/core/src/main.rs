use std::process::ExitCode;

fn main() -> ExitCode {
    let code = std::panic::catch_unwind(|| pacbayes_markov::cli::run(std::env::args_os())).unwrap_or(3);
    ExitCode::from(code as u8)
}
