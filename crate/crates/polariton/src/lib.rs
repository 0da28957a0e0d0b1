//! Ground-state solvers for one-dimensional model matter coupled to cavity
//! photon modes: exact diagonalization, Hartree–Fock, Müller RDMFT, the
//! dressed-orbital construction and polaritonic Hartree–Fock.

pub mod convergence;
pub mod dressed;
pub mod error;
pub mod exact;
pub mod hamiltonian;
pub mod hf;
pub mod linalg;
pub mod model;
pub mod polariton_hf;
pub mod rdmft;

pub use error::{Error, Result};
