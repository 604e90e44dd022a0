//! Library side of the `wcpca` command-line tool.

pub mod commands;
pub mod experiments;
