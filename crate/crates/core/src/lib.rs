// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod areal;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod heightfield;
pub mod job;
pub mod kinematics;
pub mod marks;
pub mod surface;
pub mod tool;

pub use error::{Error, Result};
