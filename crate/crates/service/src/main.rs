use std::process::ExitCode;

fn main() -> ExitCode {
    emobase_service::cli::main()
}
