//! Physical constants and unit conversions.
//!
//! Everything inside the simulator is in Hartree atomic units
//! (hbar = m_e = e = 1). Conversions to laboratory units exist only at the
//! configuration boundary.

use crate::{FwError, Result};

/// Speed of light in atomic units.
pub const C_AU: f64 = 137.036;

/// Hartree in electron volts.
pub const HARTREE_EV: f64 = 27.211386;

/// Intensity corresponding to a peak field of 1 a.u., in W/cm^2.
pub const INTENSITY_AU_WCM2: f64 = 3.50945e16;

/// Photon energy in a.u. for a wavelength of 1 nm, so that
/// omega_au = WAVELENGTH_NM_TO_OMEGA / lambda_nm.
pub const WAVELENGTH_NM_TO_OMEGA: f64 = 45.5633;

/// Peak electric field in a.u. from intensity in W/cm^2.
pub fn intensity_to_field(intensity_wcm2: f64) -> Result<f64> {
    if intensity_wcm2 <= 0.0 || !intensity_wcm2.is_finite() {
        return Err(FwError::Config(format!(
            "intensity must be positive, got {intensity_wcm2}"
        )));
    }
    Ok((intensity_wcm2 / INTENSITY_AU_WCM2).sqrt())
}

/// Angular frequency in a.u. from wavelength in nm.
pub fn wavelength_to_omega(lambda_nm: f64) -> Result<f64> {
    if lambda_nm <= 0.0 || !lambda_nm.is_finite() {
        return Err(FwError::Config(format!(
            "wavelength must be positive, got {lambda_nm}"
        )));
    }
    Ok(WAVELENGTH_NM_TO_OMEGA / lambda_nm)
}

/// Ponderomotive energy, Keldysh parameter and the predicted harmonic
/// cutoff order for a given peak field, frequency and ionization potential.
#[derive(Debug, Clone, Copy)]
pub struct StrongFieldScales {
    /// Cycle-averaged quiver energy E0^2 / (4 omega^2).
    pub up: f64,
    /// sqrt(I_p / 2 U_p); << 1 marks the tunneling regime.
    pub keldysh: f64,
    /// round((I_p + 3.17 U_p) / omega).
    pub cutoff_order: i64,
    /// Classical quiver amplitude E0 / omega^2.
    pub quiver_amplitude: f64,
}

pub fn ponderomotive_and_keldysh(e0: f64, omega: f64, ip: f64) -> StrongFieldScales {
    let up = e0 * e0 / (4.0 * omega * omega);
    let keldysh = if up > 0.0 {
        (ip / (2.0 * up)).sqrt()
    } else {
        f64::INFINITY
    };
    let cutoff_order = ((ip + 3.17 * up) / omega).round() as i64;
    StrongFieldScales {
        up,
        keldysh,
        cutoff_order,
        quiver_amplitude: e0 / (omega * omega),
    }
}
