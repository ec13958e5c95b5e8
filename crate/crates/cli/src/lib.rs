//! Experiment harness for the separable-approximation solver: q-grid scans,
//! certification sweeps, random-state and gradient-descent benchmarks, and
//! ansatz checks, each producing a self-describing CSV artifact.

pub mod bench;
pub mod harness;
pub mod output;
pub mod pool;

use sepnn::Error;

/// Exit code for invalid input.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for numerical failures.
pub const EXIT_NUMERIC: i32 = 3;

/// Maps a library error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_)
        | Error::InvalidStructure(_)
        | Error::Parse(_)
        | Error::DimensionMismatch(_)
        | Error::InvalidSubsystem { .. }
        | Error::Unsupported(_) => EXIT_USAGE,
        _ => EXIT_NUMERIC,
    }
}
