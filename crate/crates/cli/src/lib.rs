//! Command-line front end: CSV ingestion, model parsing and the `simulate`,
//! `fit`, `predict` and `bench` commands.

pub mod cli;
pub mod commands;
pub mod error;
pub mod ingest;
pub mod model;

pub use error::{CliError, CliResult};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SSANOVA_THREADS";

/// Applies the thread cap from `SSANOVA_THREADS`, if set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::input(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::input(format!("cannot configure {threads} threads: {e}")))
}
