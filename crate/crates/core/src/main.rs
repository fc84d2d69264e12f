use std::process::ExitCode;

use clap::Parser;
use parfilter::bench::{metrics, run, RunConfig};
use parfilter::Error;

fn main() -> ExitCode {
    let cfg = match RunConfig::try_parse() {
        Ok(cfg) => cfg,
        Err(e) => {
            // --help and --version land here too, with exit code 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = run(&cfg).and_then(|rows| match &cfg.csv {
        Some(path) => metrics::append_csv(path, &rows),
        None => metrics::write_records(std::io::stdout().lock(), &rows, true),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Invariant(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
