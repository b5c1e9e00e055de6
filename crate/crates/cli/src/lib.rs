//! Batch front end for `paraosc-core`: scenario files in, CSV time series,
//! SVG plots, manifests and validation reports out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{ConfigError, OutputKind, Overrides, Scenario};
pub use pipeline::{oracle_compare, run, validate, ValidationFailed};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 1;
    pub const SOLVER: u8 = 2;
    pub const VALIDATION: u8 = 3;
}

/// Maps an error to its exit code: solver aborts are 2, failed checks 3, and
/// everything else (bad config, unwritable output) 1.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use paraosc_core::Error as E;
    for cause in err.chain() {
        if cause.is::<ValidationFailed>() {
            return exit::VALIDATION;
        }
        if cause.is::<ConfigError>() {
            return exit::CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::CanonicalDrift { .. }
                | E::NonFinite { .. }
                | E::ConditionViolated { .. }
                | E::ImaginaryResidual { .. }
                | E::OracleNotCertified { .. } => exit::SOLVER,
                _ => exit::CONFIG,
            };
        }
    }
    exit::CONFIG
}
