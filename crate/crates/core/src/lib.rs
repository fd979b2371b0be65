//! Second-order training for single-layer softmax attention regression.
// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forward;
pub mod gradients;
pub mod hessian;
pub mod io;
pub mod kron;
pub mod linalg;
pub mod oracles;
pub mod seeds;
pub mod sketch;
pub mod solver;
pub mod verify;
pub mod bench;
pub mod app;

pub use error::{Error, Result};
