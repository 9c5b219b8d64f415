//! Batch pipelines over JSONL: mask encoding and decoding, offset dataset
//! construction and rollout scoring.

pub mod commands;
pub mod config;
pub mod io;

pub use config::{Overrides, RunConfig, CONFIG_ENV};

use std::fmt;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration: exit 1.
    Usage(anyhow::Error),
    /// Unusable input data: exit 2.
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Data(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

pub(crate) trait DataContext<T> {
    fn data(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> DataContext<T> for Result<T, E> {
    fn data(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Data(e.into()))
    }
}

/// What a command did: `failed` counts records reported as errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Outcome {
    pub records: usize,
    pub failed: usize,
}

impl Outcome {
    /// Exit code under the given strictness.
    pub fn exit_code(&self, strict: bool) -> i32 {
        if strict && self.failed > 0 {
            2
        } else {
            0
        }
    }
}

/// Runs `f` over `items` on `jobs` threads (0 = all cores), keeping input order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(usize, &T) -> R + Sync + Send,
) -> anyhow::Result<Vec<R>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()))
}
