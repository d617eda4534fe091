use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = busemann_cli::run(std::env::args_os());
    if result.exit_code == busemann_cli::EXIT_OK || result.exit_code == busemann_cli::EXIT_VALIDATION {
        print!("{}", result.report);
    } else {
        eprint!("{}", result.report);
    }
    ExitCode::from(result.exit_code as u8)
}
