//! Random directed graphs drawn from an expected adjacency matrix, their
//! random-walk stationary distributions, and certificates that bound how far
//! the realized stationary distribution can sit from the "expected" one.
//!
//! The crate is organized bottom-up:
//!
//! * [`randgraph`]: the Bernoulli arc model, sampling and degree statistics.
//! * [`chain`]: transition matrices, stationary solvers and the chi-squared norm.
//! * [`spectral`]: the singular gap `σ₂(I − P)`, the generalized inverse of
//!   `I − P` on mean-zero vectors and its truncated Neumann-series oracle.
//! * [`bounds`]: the one-step perturbation bound, the degree concentration
//!   lemmas and the full concentration certificate.
//! * [`zoo`]: generators for Gambler's Ruin, Tourist's Ruin, directed
//!   `G(n, p)` and the PageRank coupling, plus the conjecture explorer.
//! * [`format`]: the plain-text file formats shared with the CLI.

pub mod bounds;
pub mod chain;
mod error;
pub mod format;
pub mod randgraph;
pub mod spectral;
pub mod zoo;

pub use error::{Error, Result};

pub use bounds::{certify, ConcentrationCertificate, Verdict};
pub use chain::{Distribution, TransitionMatrix};
pub use randgraph::{DegreeStats, ExpectedAdjacency, SampledDigraph};
pub use spectral::SpectralSummary;

pub use nalgebra as na;
