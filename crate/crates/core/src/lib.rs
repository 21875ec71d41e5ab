//! Data-driven output regulation with a hybrid regulator whose internal-model
//! output map is learned online by Gaussian-process regression.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod gp;
pub mod io;
pub mod plots;

pub use error::{Error, Result};
pub mod regulator;
pub mod sim;
pub mod vdp;
