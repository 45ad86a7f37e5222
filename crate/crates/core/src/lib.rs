//! Halpern-type fixed-point iterations for monotone inclusions, with exact,
//! inexact and variance-reduced stochastic residual oracles, plus problem
//! builders for Wasserstein distributionally robust learning.

pub mod error;
pub mod halpern;
pub mod harness;
pub mod operator;
pub mod page;
pub mod point;
pub mod projections;
pub mod wdro;

pub use error::{Error, ErrorKind, Result};
pub use point::Point;
