//! Rabi–Hubbard model of a trapped-ion chain: calibration, mean field,
//! exact diagonalization, quench dynamics, linearized spin waves and
//! detection modelling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod calibrate;
pub mod chain;
pub mod cli;
pub mod error;
pub mod exact;
pub mod hp;
pub mod linalg;
pub mod meanfield;
pub mod measure;
pub mod params;
pub mod quench;
pub mod units;

pub use error::{Error, Result};
