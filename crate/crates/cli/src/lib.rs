//! Command-line front end: store lifecycle commands, benchmarks, the attack
//! lab and the indistinguishability game.

pub mod args;
pub mod bench;
pub mod commands;
pub mod error;
pub mod game;
pub mod keyfile;
pub mod lab;
pub mod targets;

pub use args::Cli;
pub use error::{CliError, Result};
