//! Exact free-fermion six-vertex symmetric functions, FG processes and their
//! kernels, domino tilings, and the bulk inhomogeneous discrete sine kernel.
//!
//! Everything outside [`asymptotics`] runs over exact rationals.

pub mod asymptotics;
pub mod cli;
pub mod fock;
pub mod linalg;
pub mod params;
pub mod process;
pub mod ratfun;
pub mod symfun;
pub mod tiling;
pub mod vertex;

mod error;

pub use error::{Error, Result};
pub use params::{q, qi, Q};
