//! Spectral decimation for the self-similar pq Laplacian on the integer
//! half-line.
//!
//! - [`laplacian`]: operator rows, truncations, invariant measure,
//!   symmetrization.
//! - [`exact`]: the same constructions over exact rationals.
//! - [`decimation`]: the cubic `R`, `φ₀`, and the Schur-complement identity.
//! - [`julia`]: backward orbits and interval covers of the Julia set of `R`.
//! - [`eigenfunction`]: formal eigenfunctions and their traces at `3^n`.
//! - [`spectral`]: Sturm-sequence eigenvalues, closure and containment
//!   checks, spectral dimension.
//! - [`cli`]: the `pq-spectra` command line and report serialization.

pub mod caps;
pub mod cli;
pub mod decimation;
pub mod eigenfunction;
pub mod error;
pub mod exact;
pub mod julia;
pub mod laplacian;
pub mod spectral;

pub use caps::Caps;
pub use decimation::CubicMap;
pub use error::{Error, Result};
pub use laplacian::{Boundary, PqParams};
