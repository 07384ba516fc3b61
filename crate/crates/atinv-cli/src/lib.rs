//! Batch driver for the invariant computations: reads a JSON run
//! configuration, executes one command, and writes reports whose bytes are
//! a deterministic function of the configuration.

pub mod config;
pub mod runs;
pub mod svg;

pub use config::{Limits, RunConfig, SweepDef, Tolerances};
pub use runs::{
    run_distinguish, run_invariant, run_sweep, run_verify, DistinguishReport, InvariantReport,
    SweepOutput, VERIFY_SUITES,
};

/// Process exit codes shared by the binary and its tests.
pub mod exit_codes {
    pub const OK: i32 = 0;
    pub const CONFIG_ERROR: i32 = 2;
    pub const PRECISION_NOT_MET: i32 = 3;
    pub const VERIFICATION_FAILURE: i32 = 4;
}
