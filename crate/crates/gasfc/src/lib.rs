//! File formats and the `gasfc` command-line pipeline on top of
//! `gasfc-core`: CSV ingestion with schema checks, JSON checkpoints and
//! configs, and one function per subcommand.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod reference;

pub use error::{exit, AppError, Result};
