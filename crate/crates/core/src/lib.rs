//! Finite-difference Landau-Lifshitz-Gilbert solver with semi-implicit BDF projection schemes.

pub mod demag;
pub mod error;
pub mod grid;
pub mod krylov;
pub mod material;

pub use error::{Error, Result};
pub mod field;
pub mod harness;
pub mod integrators;
pub mod io;
