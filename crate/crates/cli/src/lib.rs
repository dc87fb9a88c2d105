//! Config-driven experiment runner around `tumorlim`.

// NaN-rejecting guards and index loops over several fields are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{simulate, sweep, verify, CheckResult, RunManifest, Status, VerifyError, VerifyReport};
pub use config::{Config, ConfigError};
