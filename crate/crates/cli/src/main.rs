use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use mdingarch_cli::{run, Cli, CliError, Output};

fn emit(out: Output) -> Result<(), CliError> {
    for (path, body) in &out.files {
        std::fs::write(path, body).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(out.stdout.as_bytes())?;
    stdout.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli).and_then(emit) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
