use std::process::ExitCode;

fn main() -> ExitCode {
    match gbban::cli::run(std::env::args_os(), &mut std::io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(gbban::cli::exit_code(&e) as u8)
        }
    }
}
