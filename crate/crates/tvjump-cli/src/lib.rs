//! Library half of the `tvjump` command-line tool: image I/O, run
//! parameters, report serialization, the subcommand implementations, and
//! the verification suites. The binary in `main.rs` is a thin argument
//! parser over these modules, which keeps every behavior reachable from
//! integration tests.

pub mod commands;
pub mod config;
pub mod pnm;
pub mod report;
pub mod suites;
