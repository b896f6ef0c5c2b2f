//! Text formats and subcommands for the `fbs` tool.

pub mod commands;
pub mod document;
pub mod export;
pub mod svg;
pub mod trace;

pub use commands::{run, Cli, CommandOutput, Status};
pub use document::SystemDocument;
