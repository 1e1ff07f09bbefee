//! Quantum kernel matrices from simulated parameterised circuits, their
//! block-diagonal subsampling, and offline reconstruction by chordal
//! maximum-determinant completion.

pub mod analysis;
pub mod completion;
pub mod error;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod pqc;
pub mod sparsity;

pub use error::{Error, Result};
