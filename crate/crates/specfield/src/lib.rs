//! Standard-library companion to `specfield-core`: on-disk formats, dataset
//! plumbing, scene/config file parsing, the rayon executor and everything
//! the `specfield` binary is built from.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod io;
pub mod scenefile;

pub use error::{CliError, CliResult};
