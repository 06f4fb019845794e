//! Least-squares variational inference.
//!
//! Each iteration fits the target log-density by ordinary least squares on
//! the sufficient statistic of an exponential family, under draws from the
//! current approximation, and moves the natural parameter part of the way
//! toward the fitted coefficients.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod expfam;
pub mod gaussian;
pub mod lsvi;
pub mod numerics;
pub mod stepsize;
pub mod targets;

pub use error::{LsviError, Result};
pub use expfam::{CanonicalParam, Family, NaturalParam};
pub use lsvi::{run_generic, RunOutput, RunSettings};
pub use numerics::RngStream;
pub use stepsize::StepsizePolicy;
