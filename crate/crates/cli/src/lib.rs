//! Experiment runner for the mixext library: configuration, catalog
//! functions, verification suites and report emission.

pub mod catalog;
pub mod commands;
pub mod config;
pub mod report;
pub mod suites;
