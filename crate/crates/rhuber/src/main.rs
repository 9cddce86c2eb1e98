use std::process::ExitCode;

fn main() -> ExitCode {
    rhuber::cli::main()
}
