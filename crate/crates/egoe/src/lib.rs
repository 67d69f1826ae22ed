//! Embedded Gaussian Orthogonal Ensembles with k-body interactions for
//! spinless fermions: EGOE(k) and the quenched EGOE(1+k) Hamiltonian
//! H = H0 + lambda V(k).
//!
//! The crate covers the full desk-scale workflow:
//!
//! - [`analytics`]: closed-form trace moments, kurtosis, Edgeworth and
//!   semicircle densities, and the Gaussian / Bessel survival laws.
//! - [`fock`]: bitmask Fock basis, fermionic k-body operator strings, and
//!   many-body matrix construction.
//! - [`ensemble`]: GOE coefficient draws in k-particle space with
//!   reproducible per-member substreams.
//! - [`spectral`]: diagonalization, spectrum normalization, ensemble
//!   densities, and pooled sample moments.
//! - [`dynamics`]: post-quench survival probabilities with initial-state
//!   selection and the comparison laws.

pub mod analytics;
pub mod bessel;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod fock;
pub mod spectral;

pub use analytics::{MomentSet, SystemParams};
pub use ensemble::{EnsembleConfig, KBodyCoefficients};
pub use error::{EgoeError, Result};
pub use fock::{BasisState, ManyBodyMatrix};
pub use spectral::Spectrum;
