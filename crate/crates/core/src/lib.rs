//! Magnetic fields, time-averaged potentials and trap characterization for
//! the cross-wire time-orbiting-potential (TOP) atom-chip trap.
//!
//! Internal quantities are SI throughout (T, m, A, s, kg, J). The [`cli`]
//! module converts to and from gauss, millimetres and kHz at the boundary.

// negated comparisons are used deliberately so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod average;
pub mod characterize;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod units;

pub use error::{Error, Result};
pub use fields::Vec3;
