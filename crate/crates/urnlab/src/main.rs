use std::process::ExitCode;

use urnlab::AppError;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    match urnlab::cli::execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        // Downstream reader closed early (`| head`).
        Err(AppError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::to_string(&e.record()).unwrap_or_else(|_| e.to_string());
            eprintln!("{record}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
