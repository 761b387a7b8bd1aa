//! Second-order parameter estimation and bias-reduced tail-index estimation
//! for heavy-tailed data under random right truncation.

pub mod asymptotics;
pub mod error;
pub mod montecarlo;
pub mod estimators;
pub mod product_limit;
pub mod quadrature;
pub mod sampling;
pub mod second_order;
pub mod selection;

pub use error::{Error, Result};
