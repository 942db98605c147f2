//! Classical and quantum dynamics of the anisotropic XY spin chain in a tilted field.
//!
//! The crate is organized by workload:
//!
//! * [`classical`]: spin-chain states, the Hamiltonian, RK4 integration and the
//!   one-spin periodic orbits (libration, rotation, separatrix).
//! * [`lyapunov`]: Benettin two-trajectory exponents, stability certificates,
//!   the fixed-point exponent, the separatrix cusp and Floquet mode exponents.
//! * [`spectral`]: spatial mode intensities, the λ_p(L) fit, unstable q-windows,
//!   Brillouin-zone backfolding, temporal spectra and the H₀/H₁ split.
//! * [`quantum`]: spin-S chains in the zero-momentum sector, level statistics,
//!   relaxation dynamics and scar diagnostics.
//! * [`arnold`]: resumable long runs through the nearly quasiperiodic regime.
//! * [`ensemble`]: classical ensembles imitating quantum states and the
//!   single-observable Lyapunov protocol.
//!
//! Scans and ensembles fan out through [`par`], which uses rayon when the
//! `parallel` feature is on and a plain loop otherwise. Both paths produce
//! identical numbers.

pub mod arnold;
pub mod classical;
pub mod ensemble;
pub mod error;
pub mod lyapunov;
pub mod par;
pub mod quantum;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod vec3;

pub use error::{Error, Result};
