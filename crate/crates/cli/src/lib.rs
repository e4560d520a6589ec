//! Library side of the `linkforge` binary: file formats and subcommands.

pub mod commands;
pub mod error;
pub mod formats;
