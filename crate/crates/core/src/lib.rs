//! Semidiscrete canonical Hamiltonian systems on a uniform lattice: shift and
//! difference operators, a spectrally accurate skew central operator, discrete
//! variational calculus, integrators, and conservation-law diagnostics.

pub mod certify;
pub mod cli;
pub mod config;
pub mod conservation;
pub mod discrete_ops;
pub mod error;
pub mod initial;
pub mod lagrangian;
pub mod lattice;
pub mod systems;
pub mod variational;

pub use error::{Error, Result};
pub use lattice::{Boundary, LatticeField, Mesh};
