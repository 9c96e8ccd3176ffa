use std::process::ExitCode;

fn main() -> ExitCode {
    research_assess::cli::main_with_args(std::env::args().collect())
}
