//! File formats, reports and the `ttw` command line for `ttw-core`.
//!
//! Instances, metrics and schedules are JSON. Experiment results are CSV
//! rows with a fixed column set (see [`report::Row`]).

pub mod bench;
pub mod caps;
pub mod cli;
pub mod commands;
pub mod io;
pub mod report;
