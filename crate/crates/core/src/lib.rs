//! Exact and numerical checks of representation-theoretic, lattice and
//! symbolic constructions built around indexed Dirac sea fermions.
//!
//! The crate is organised by subject:
//!
//! * [`repcomb`]: Young diagrams, hook lengths, U(n) irrep dimensions and the
//!   exact fluctuation sum over irreducible components.
//! * [`haarlab`]: Haar-random unitaries and Monte Carlo estimates of the
//!   fluctuations of averaged tensor-power matrix elements.
//! * [`mixing`]: the microscopic-mixing unitaries and the mixed Dirac current
//!   in finite-dimensional models.
//! * [`diracprop`]: 1+1 dimensional free and first-order perturbed Dirac
//!   kernels, Cauchy evolution and the glueing identity on a periodic lattice.
//! * [`kreinfock`]: an explicit finite Fock–Krein space with the effective
//!   projection and the fermionic operator identities.
//! * [`wickengine`]: exact symbolic Wick contraction and commutator algebra.
//! * [`exchange`]: momentum-lattice sums for the exchange amplitude.
//! * [`experiments`] and [`report`]: the experiment runner behind the CLI.

pub mod diracprop;
pub mod error;
pub mod exchange;
pub mod experiments;
pub mod haarlab;
pub mod kreinfock;
pub mod linalg;
pub mod mixing;
pub mod repcomb;
pub mod report;
pub mod wickengine;

pub use error::{Error, Result};
