//! Numerical operator calculus on Hilbert-module fibers: Kohn-Nirenberg
//! quantization of phase-space symbols, the Heisenberg group action on
//! operators, and the explicit left-inverse recovering a symbol from its
//! operator, verified at desk scale.

pub mod error;
pub mod experiments;
pub mod grid;
pub mod heisenberg;
pub mod io;
pub mod module_space;
pub mod quantize;
pub mod recover;
pub mod rieffel;
pub mod symbols;

pub use error::{CordesError, Result};
