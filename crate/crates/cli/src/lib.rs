//! Library surface of the `granuflow` CLI: configuration schema, output
//! emission, and the subcommand implementations, kept separate from the
//! binary so integration tests can drive them directly.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;
