//! Hosting-capacity analysis for radial distribution feeders.
//!
//! The crate is organised around a power-flow based feasibility oracle
//! ([`oracle`]) that labels DER deployment scenarios ([`scenario`],
//! [`generate`]) and a pool-based active learner ([`active`]) that spends a
//! fixed labelling budget to locate the feasibility boundary and report
//! hosting-capacity metrics.

// `!(x > 0.0)` style checks are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod error;
pub mod generate;
pub mod grid;
pub mod learner;
pub mod oracle;
pub mod profiles;
pub mod scenario;

pub use error::{Error, Result};
pub mod commands;
pub mod experiment;
pub mod fixtures;
