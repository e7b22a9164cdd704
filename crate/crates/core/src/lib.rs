//! Numerical solvers for hybrid Volterra integral equations with
//! double-integral memory, fixed-time impulses and moving-time impulses.
//!
//! The crate provides a kernel expression language, impulse schedules and
//! breakpoints, piecewise-continuous function storage with weighted norms,
//! segmented quadrature, the hybrid fixed-point operator, global and
//! segment-wise Picard solvers, the 3×3 matrix contraction analysis, the
//! truncated multiple-integral series solver, and the `hvolterra` CLI.

// `!(a > b)` is used on purpose so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod kernel_lang;
pub mod piecewise;
pub mod quadrature;
pub mod schedule;
pub mod hybrid_operator;
pub mod contraction;
pub mod solvers;
pub mod series;
pub mod cli;
