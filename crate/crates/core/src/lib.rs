//! Simulation of circulant-structured linear algebra on a quantum register.
//!
//! The library builds quantum circuits that apply, exponentiate, invert and
//! multiply circulant operators (and their Toeplitz, Hankel and block
//! relatives), runs them on an exact statevector simulator, and checks every
//! construction against direct dense linear algebra.

pub mod arith;
pub mod circulant;
pub mod cyclic;
pub mod dense;
pub mod error;
pub mod gates;
pub mod hamsim;
pub mod hhl;
pub mod lcu;
pub mod oracle;
pub mod product;
pub mod state;

pub use error::{Result, SimError};
