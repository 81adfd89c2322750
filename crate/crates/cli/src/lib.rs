//! Command-line front end: experiment configuration, synthetic runs, trial
//! ingestion with windowing, and CSV/metadata emission.

pub mod config;
pub mod io;
pub mod manifest;
pub mod runner;
pub mod windowing;
