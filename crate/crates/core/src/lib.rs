//! Central L-values of the cubic twists `x³ + y³ = D` through theta traces at CM points.

pub mod arith;
pub mod cli;
pub mod curve;
pub mod eisenstein;
pub mod formulas;
pub mod error;
pub mod ideals;
pub mod modular;
pub mod verify;

pub use error::{Error, Result};
