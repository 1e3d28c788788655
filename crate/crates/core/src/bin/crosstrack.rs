use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CROSSTRACK_LOG", "warn"))
        .init();
    let code = crosstrack::cli::run(std::env::args_os());
    ExitCode::from(code.clamp(0, 255) as u8)
}
