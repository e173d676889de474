//! Batch front end for brwtie: experiment configs, commands that write
//! CSV/JSON outputs, and the acceptance suite behind `brwtie verify`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;
