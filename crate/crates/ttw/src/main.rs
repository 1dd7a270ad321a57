use std::process::ExitCode;

fn main() -> ExitCode {
    ttw::cli::main()
}
