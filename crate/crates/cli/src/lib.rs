//! Command-line front end for `subcurv`: config files, builtin scenarios and
//! deterministic reports.

pub mod commands;
pub mod config;
pub mod registry;
pub mod report;
