//! Library half of the `quasimorse` command-line tool.

pub mod commands;
pub mod config;
