//! Library side of the `laps` binary, so integration tests can drive the
//! commands and the server in-process.

pub mod commands;
pub mod serve;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// A golden list or metric requirement did not match.
    pub const MISMATCH: u8 = 1;
    /// Bad usage, unreadable input, or a failed run.
    pub const ERROR: u8 = 2;
}
