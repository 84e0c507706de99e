//! Library surface of the `pp` command-line tool: configuration schema,
//! command implementations, and output formatting.

pub mod commands;
pub mod config;
pub mod output;
