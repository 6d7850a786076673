//! Numerics for semigroups generated by planar contracting maps that need
//! not be conformal: inverse branches of concrete map families, the
//! singular-value calculus of their derivatives, symbolic dynamics over a
//! Markov transition matrix, pressure/Bowen-root dimension brackets,
//! geometric-distortion certificates and fractal renderings.
//!
//! The binary `nonconf-ifs` drives the same functionality from JSON run
//! configurations; see the crate README.

pub mod cli;
pub mod config;
pub mod distortion;
pub mod error;
pub mod fractal;
pub mod maps;
pub mod numeric;
pub mod symdyn;
pub mod thermo;

pub use error::{IfsError, Result};
