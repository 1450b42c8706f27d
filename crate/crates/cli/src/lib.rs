//! Library side of the `cvtele` command: configuration, run modes,
//! verification suites and artifact rendering.

pub mod config;
pub mod error;
pub mod output;
pub mod parse;
pub mod run;
pub mod verify;

pub use config::{Cli, RunConfig};
pub use error::CliError;
pub use run::{run, Report};
