// NaN-rejecting `!(x > 0.0)` checks and published coefficient literals are kept as written.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::inconsistent_digit_grouping,
    clippy::excessive_precision
)]

pub mod asymptotics;
pub mod error;
pub mod exact;
pub mod method;
pub mod montecarlo;
pub mod quadrature;
pub mod risk;
pub mod specfun;
pub mod summation;
pub mod tables;

pub use error::{Error, Result};
