//! Thermalization-resource toolkit for collision-model baths.
//!
//! The crate computes how large a bath a repeated-interaction (collision)
//! model needs before a system state becomes operationally indistinguishable
//! from the bath equilibrium: one-shot max-divergences and their smoothed
//! variants, convex-split bath-size certificates, energy-spacing optimality
//! conditions, randomized collision dynamics, and a desk-scale disordered
//! Heisenberg-chain ensemble study tying the pieces together.
//!
//! Everything numerical is deterministic for a fixed seed, including under
//! worker-count changes.

pub mod collision;
pub mod combinatorics;
pub mod ensemble;
pub mod entropy;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod optimality;
pub mod random;
pub mod rng;
pub mod thermal;
pub mod tol;

pub use error::{Error, Result};
pub use linalg::{
    eig_hermitian, C64, ComplexMatrix, DensityMatrix, HermitianOperator, SpectralDecomposition,
    StateVector,
};
