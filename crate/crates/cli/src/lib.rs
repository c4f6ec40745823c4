//! Configuration and scenario runner behind the `dlambda` binary.

pub mod config;
pub mod runner;
