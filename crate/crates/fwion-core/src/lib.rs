//! Two-dimensional quantum dynamics of a single active electron bound to a
//! multiply charged ionic core and driven by an intense, linearly polarized,
//! near-optical laser pulse.
//!
//! The electron is propagated with a split-operator Fourier scheme under the
//! weakly relativistic Foldy-Wouthuysen Hamiltonian (second order in v/c):
//! the nonrelativistic part plus the Pauli magnetic coupling, the leading
//! kinetic mass-shift term, the Darwin term and spin-orbit coupling, each
//! individually switchable. On top of the propagator sit the observable
//! pipelines: field-free eigenstates (spectral method and imaginary-time
//! relaxation), center-of-mass trajectories, radiation/harmonic spectra,
//! spin dynamics, and photoelectron (ATI) spectra assembled from absorbed
//! boundary flux.
//!
//! All internal physics is in Hartree atomic units; unit conversions live at
//! the configuration boundary.

pub mod config;
pub mod eigen;
pub mod error;
pub mod fft;
pub mod grid;
pub mod observables;
pub mod photoelectron;
pub mod potential;
pub mod propagator;
pub mod pulse;
pub mod runner;
pub mod scenario;
pub mod snapshot;
pub mod spinor;
pub mod toggles;
pub mod units;

pub use error::FwError;
pub use grid::Grid2D;
pub use potential::SoftCorePotential;
pub use pulse::LaserPulse;
pub use spinor::SpinorWavefunction;
pub use toggles::TermToggles;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, FwError>;
