//! Command-line front end for the twin-beam squeezing simulator.

pub mod commands;
pub mod config;
pub mod output;

use twinbeam::error::Error;

/// Exit codes: configuration problems, violated preconditions and I/O
/// failures are distinguishable for scripting.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Configuration(_) => EXIT_CONFIG,
        Error::Parameter(_)
        | Error::Degenerate(_)
        | Error::Calibration(_)
        | Error::Internal(_) => EXIT_PRECONDITION,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
    }
}
