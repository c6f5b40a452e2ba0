//! Experiment configs, commands and checks behind the `tslab` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod properties;
