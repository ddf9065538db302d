//! File formats, the bundled corpus and the command-line driver for
//! `twosort-core`.

pub mod app;
pub mod corpus;
pub mod error;
pub mod files;
pub mod random;
pub mod selftest;

pub use error::CliError;
