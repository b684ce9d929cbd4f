//! Ensemble proximal policy optimization on sparse-reward gridworlds.
//!
//! `K` categorical sub-policies are averaged into one ensemble policy that
//! alone collects experience. All sub-policies are trained jointly under a
//! per-sub-policy surrogate, an ensemble-level surrogate and a pairwise
//! diversity penalty.

// Negated comparisons (`!(x > 0.0)`) are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advantage;
pub mod autodiff;
pub mod checkpoint;
pub mod envs;
pub mod error;
pub mod losses;
pub mod nn;
pub mod policy;
pub mod seeding;
pub mod trainer;

pub use error::{Error, Result};
