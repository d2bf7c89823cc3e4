//! Symbolic and numeric tools for singularities of mixed polynomial maps `C^2 -> C`.

pub mod config;
pub mod deform;
pub mod hessian;
pub mod link;
pub mod mixedpoly;
pub mod numeric;
pub mod parse;
pub mod scalar;
pub mod singular;
pub mod verify;

pub use mixedpoly::{MixedPolynomial, WeightSystem};
pub use scalar::ComplexScalar;
