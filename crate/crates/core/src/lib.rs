//! Minimally entangled typical thermal states for the Z2 lattice gauge chain,
//! with exact and adaptive-variational imaginary-time evolution.

pub mod avqite;
pub mod dense;
pub mod error;
pub mod metts;
pub mod model;
pub mod observables;
pub mod pauli;
pub mod rng;
pub mod statevector;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use pauli::{Pauli, PauliString, PauliSum};
pub use statevector::{Basis, ClassicalProductState, Statevector};
