//! Numerical laboratory for Gibbs measures on Wiener paths.
//!
//! The crate builds, around a time-discretized Brownian path, the full chain of
//! objects needed to study attractive pair interactions of the form
//! `H(t-s, W(t)-W(s))`:
//!
//! * [`interactions`] — time correlations, spatial potentials (including
//!   singular and mollified-delta variants) and admissibility classes;
//! * [`paths`] — path sampling, Hamiltonian quadrature, occupation
//!   functionals, local time, diffusive rescaling;
//! * [`gibbs`] — path-space Metropolis sampling of the finite-volume Gibbs
//!   measure, endpoint statistics and thermodynamic integration;
//! * [`transfer`] — the block Markovianization: Nystrom transfer operator,
//!   Perron eigenpair, tilted chain, Doeblin/TV diagnostics and the
//!   Dirichlet-form CLT variance;
//! * [`she`] — the mollified stochastic heat equation application: Gaussian
//!   identity, annealed Feynman-Kac ratios, homogenized references and
//!   partition-growth fits;
//! * [`verify`] — numerical verifiers for the supporting lemmas
//!   (Khas'minskii, GRR modulus, delta moments, simplex identity, sup/inf
//!   maximizer, Pinsker).
//!
//! All Monte Carlo entry points are deterministic functions of `(config, seed)`
//! and reductions are performed in a fixed order, so results do not depend on
//! the worker count. Data-parallel inner loops go through [`par`], which falls
//! back to sequential iteration when the `parallel` feature is disabled.

pub mod error;
pub mod gibbs;
pub mod interactions;
pub mod linfit;
pub mod par;
pub mod paths;
pub mod quad;
pub mod she;
pub mod stats;
pub mod tabulated;
pub mod transfer;
pub mod verify;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Derives the RNG seed of replica `index` from a base seed.
///
/// Replica streams are `seed XOR index`; ChaCha treats distinct seeds as
/// independent streams, and the rule keeps replay trivial.
pub fn replica_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}
