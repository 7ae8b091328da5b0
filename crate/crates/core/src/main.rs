use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match fpp_forge::cli::run(std::env::args_os()) {
        None => ExitCode::SUCCESS,
        Some(report) => {
            let _ = writeln!(std::io::stdout(), "{}", report.to_json());
            if let Some(e) = &report.error {
                eprintln!("error: {e}");
            }
            ExitCode::from(report.exit_code as u8)
        }
    }
}
