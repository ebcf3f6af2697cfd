//! Finite-dimensional operadic calculus and the binary operadic Lax
//! representation of the harmonic oscillator.
//!
//! - [`multilinear`]: dense multilinear operations on `R^d`.
//! - [`operad`]: partial/total composition, Gerstenhaber bracket, law checks.
//! - [`oscillator`]: Hamiltonian, Lax pair, auxiliary functions, the
//!   eight-parameter family of structure constants, Γ and the Cramer identities.
//! - [`lax`]: RK4 integration of the coupled system and its residuals.
//! - [`verify`]: seeded verification suites shared by the CLI and tests.
//! - [`cli`]: the `oplax` command-line front end.

pub mod cli;
pub mod error;
pub mod lax;
pub mod multilinear;
pub mod operad;
pub mod oscillator;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use multilinear::{Operation, Vector};
