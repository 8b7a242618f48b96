//! Numerical toolkit for building N-particle wavefunctions with prescribed
//! single-particle densities.
//!
//! Given a symmetric wavefunction psi on a product grid, with single-particle
//! density rho, and a sequence of target densities rho_n whose square roots
//! converge to sqrt(rho) in H1, the pipeline constructs wavefunctions psi_n
//! whose marginals equal rho_n exactly (to quadrature tolerance) and which
//! converge to psi in L2 and H1:
//!
//! 1. [`realloc`] — an iterative scheme that multiplies the wavefunction by
//!    sqrt(1 - S), shaving marginal mass where it exceeds the target, then
//!    refills the remaining deficit with a product-form correction term.
//! 2. [`smoothing`] — a marginal-preserving Gaussian smoothing operator and a
//!    diagonal epsilon schedule that upgrade the L2 approximants to H1.
//! 3. [`sign`] — sign extraction, weighted-Sobolev smoothing of the sign with
//!    Lipschitz control, and a circle lifting that restores signed (complex)
//!    wavefunctions with the marginal constraint intact.
//! 4. [`pipeline`] — end-to-end orchestration, target generators, and CSV
//!    convergence reports.

pub mod config;
pub mod error;
pub mod field;
pub mod grid;
pub mod pipeline;
pub mod realloc;
pub mod sign;
pub mod smoothing;
pub mod tol;
pub mod trace;
pub mod wff;

pub use error::{Error, Result};
pub use field::{
    relative_l1_error, sqrt_density_h1_distance, sqrt_density_l2_distance, ConfigField,
    DensityField, FieldKind, ScalarField,
};
pub use grid::GridSpec;
