//! Batch pipeline over JSON artifacts: generate → correlate → fit →
//! certify → reconstruct → predict → verify.

pub mod commands;
mod error;
pub mod format;

pub use commands::{run, Cli};
pub use error::CliError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const GENERATION: i32 = 2;
    pub const DEGENERATE: i32 = 3;
    pub const INFINITE_P: i32 = 4;
    pub const ZERO_COEFFICIENT: i32 = 5;
    pub const VERIFY_FAILED: i32 = 6;
    pub const USAGE: i32 = 64;
}
