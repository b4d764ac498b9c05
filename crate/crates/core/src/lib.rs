//! Converts a LaTeX source tree into retrieval-ready chunks.

pub mod annotations;
pub mod chunker;
pub mod diagnostics;
pub mod emit;
pub mod error;
pub mod labels;
pub mod markdown;
pub mod package;
pub mod pipeline;
pub mod refs;
pub mod source;
pub mod structure;
pub mod tex;

pub use diagnostics::{Diagnostics, Location, Warning};
pub use error::{Error, Result};
pub use chunker::{Chunk, ChunkOptions};
pub use pipeline::{Config, Summary};
