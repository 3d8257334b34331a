//! Switches for the individual terms of the weakly relativistic Hamiltonian.

use serde::{Deserialize, Serialize};

use crate::units::C_AU;
use crate::{FwError, Result};

/// Term switches plus an overridable speed of light.
///
/// The base Hamiltonian (kinetic + potential + laser coupling) is always
/// active; these toggles control the corrections:
/// `pauli` the sigma.B magnetic spin coupling, `mass_shift` the -p^4/8c^2
/// kinetic correction, `darwin` the contact term, `spin_orbit` the
/// sigma.(E' x p) coupling. With `dipole_approximation` the pulse is
/// evaluated at z = 0 everywhere, which removes the magnetic force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TermToggles {
    pub dipole_approximation: bool,
    pub pauli: bool,
    pub mass_shift: bool,
    pub darwin: bool,
    pub spin_orbit: bool,
    /// Overrides the speed of light everywhere (retardation, amplitudes and
    /// every 1/c correction); used to isolate O(1/c^2) effects by scaling.
    pub c_override: Option<f64>,
    /// Scale the A^2 interaction term by 1/2, as produced by expanding
    /// (p + A/c)^2 / 2. Disable to use the full A^2/c^2 weight instead.
    pub a2_half_factor: bool,
}

impl Default for TermToggles {
    fn default() -> Self {
        TermToggles {
            dipole_approximation: false,
            pauli: false,
            mass_shift: false,
            darwin: false,
            spin_orbit: false,
            c_override: None,
            a2_half_factor: true,
        }
    }
}

impl TermToggles {
    /// Everything off: plain nonrelativistic dynamics beyond or within the
    /// dipole approximation.
    pub fn nonrelativistic(dipole: bool) -> Self {
        TermToggles {
            dipole_approximation: dipole,
            ..Default::default()
        }
    }

    /// All corrections on.
    pub fn all_on() -> Self {
        TermToggles {
            dipole_approximation: false,
            pauli: true,
            mass_shift: true,
            darwin: true,
            spin_orbit: true,
            c_override: None,
            a2_half_factor: true,
        }
    }

    /// Effective speed of light.
    pub fn c(&self) -> f64 {
        self.c_override.unwrap_or(C_AU)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.c_override {
            if !(c > 0.0 && c.is_finite()) {
                return Err(FwError::Config(format!(
                    "c_override must be positive, got {c}"
                )));
            }
        }
        Ok(())
    }

    /// True when the spin block of the propagator has work to do.
    pub fn spin_active(&self) -> bool {
        self.pauli || self.spin_orbit
    }
}
