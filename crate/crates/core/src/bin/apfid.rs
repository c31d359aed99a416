use std::process::ExitCode;

fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("APFID_LOG")).try_init();
    let code = apfid::cli::cli_main(std::env::args_os());
    ExitCode::from(code as u8)
}
