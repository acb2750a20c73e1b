//! Numerical laboratory for compositions of random unitary channels acting
//! on pure lattice states.
//!
//! The crate discretizes `L²(R^d)` on a periodic box, implements the shift
//! and impulse channels exactly in the spectral domain, and verifies
//! strong-law, central-limit, L1 and random-walk convergence of density
//! kernels and weak-topology functionals through seeded Monte-Carlo
//! experiments with statistical acceptance tests.

pub mod channels;
pub mod density;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod sources;
pub mod stats;

pub use error::{Error, Result};
