//! Subgradient oracles for objectives built from one-dimensional optimal
//! transport between empirical measures, together with the diagnostics and
//! experiments that compare empirical and population subdifferentials.

// `!(a <= b)` comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod models;
pub mod objectives;
pub mod optimize;
pub mod oracles;
pub mod ot1d;
pub mod par;
pub mod rng;

pub use error::{Error, Result};
pub use measures::{EmpiricalMeasure1D, EmpiricalMeasureD, SourceDistribution};
pub use models::{BuiltinModel, ParamModel};
pub use objectives::Objective;
pub use oracles::{SpectralWeight, Subgradient};
pub use par::Execution;
