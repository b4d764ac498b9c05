use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Fatal errors. Everything recoverable is reported through
/// [`Diagnostics`](crate::Diagnostics) instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read main file {}: {source}", path.display())]
    MissingInput { path: PathBuf, source: io::Error },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("invalid YAML in {}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Yaml {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("invalid option: {0}")]
    InvalidOption(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
