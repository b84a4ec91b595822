//! Desk-scale simulator and verifier for one-photon scattering in
//! non-relativistic QED.
//!
//! The crate builds truncated Pauli-Fierz Hamiltonians on a finite photon
//! mode grid tensored with a finite-difference matter grid, computes ground
//! states and resolvent boundary values, evaluates the one-photon T-matrix,
//! and cross-checks the identities connecting them by independent
//! time-domain and frequency-domain computations.
//!
//! Modules mirror the physical layering:
//!
//! * [`modes`] – discretized photon momenta, dispersion, polarization
//!   frames, and coupling form factors.
//! * [`fock`] – occupation-number Fock space with creation, annihilation,
//!   field, number, and free-field-energy operators.
//! * [`matter`] – finite-difference particle grids with potential, momentum,
//!   Laplacian, and spin operators.
//! * [`hamiltonian`] – assembly of the full interacting Hamiltonian and the
//!   commutator operators `D1`, `D2`, with residual verifiers.
//! * [`spectral`] – ground states, shifted resolvent solves, boundary-value
//!   sweeps, the half-line phase integral, and Abelian limits.
//! * [`scattering`] – regularized asymptotic creation operators, the
//!   pull-through identity, the T-matrix, and the two-path S-matrix check.
//! * [`config`], [`report`], [`runner`] – experiment configuration, run
//!   reports, and the command implementations behind the `pfsim` binary.
//!
//! Every runnable capability has a corresponding example under `examples/`;
//! start with `ground_state` and `tmatrix_table`.

pub mod config;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod linalg;
pub mod matter;
pub mod modes;
pub mod report;
pub mod runner;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};
