//! Exact discrete operator machinery and a Monte Carlo harness for the
//! bending-energy interface model on the cube `[-L,L]^d`.
//!
//! The crate is organized around the Laplacian field `eta = Δφ` of the
//! interface `φ`: [`operators`] provides the Dirichlet Laplacian and
//! bi-Laplacian Green's machinery, [`bergman`] the harmonic projection and
//! special profiles built on it, [`gibbs`] the Hamiltonians and energies of
//! the tilted field measures, [`sampler`] a MALA chain targeting them, and
//! [`limits`] the thermodynamic-integration pipelines that compare the
//! non-Gaussian model against its Gaussian reference.

pub mod bergman;
pub mod error;
pub mod gibbs;
pub mod lattice;
pub mod limits;
pub mod operators;
pub mod potential;
pub mod quadrature;
pub mod sampler;

pub use error::{Error, Result};
