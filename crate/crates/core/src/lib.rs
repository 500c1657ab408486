//! Auditing how faithfully post-hoc explanations track a blackbox classifier
//! across protected groups.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blackbox;
pub mod dataset;
pub mod error;
pub mod global;
pub mod linalg;
pub mod local;
pub mod metrics;
pub mod rng;
pub mod runner;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
