//! Linearly polarized laser pulse with a linear turn-on, constant plateau
//! and retarded z-dependence.
//!
//! With tau = t - z/c the vector potential is
//!   A_x = -(c E0 / (omega t_on)) [tau sin(omega tau) + cos(omega tau)/omega]
//! on the ramp and A_x = -(c E0 / omega) sin(omega tau) on the plateau, giving
//!   E_x = B_y = E0 (tau / t_on) cos(omega tau)  (ramp),
//!   E_x = B_y = E0 cos(omega tau)               (plateau).
//! All fields vanish for tau <= 0 and are frozen to zero after t_p so a run
//! may continue field-free. A_x is continuous at the ramp/plateau seam only
//! when omega t_on = (m + 0.25) 2 pi; the constructor rounds the requested
//! turn-on cycle count to the nearest admissible value and records the shift.

use serde::{Deserialize, Serialize};

use crate::{FwError, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LaserPulse {
    /// Peak field in a.u.
    pub e0: f64,
    /// Angular frequency in a.u.
    pub omega: f64,
    /// End of the linear turn-on, in a.u. of time.
    pub t_on: f64,
    /// End of the constant-amplitude plateau; fields are zero afterwards.
    pub t_p: f64,
    /// Speed of light used for the retardation and amplitudes (normally
    /// 137.036, overridable for scaling tests).
    pub c: f64,
    /// Turn-on cycles actually used, (m + 0.25) for integer m >= 0.
    pub turn_on_cycles: f64,
    /// Difference between the requested and the admissible turn-on cycles.
    pub turn_on_adjustment: f64,
    /// Evaluate the fields at z = 0 everywhere (dipole approximation).
    pub dipole: bool,
}

/// Sampled pulse values at one (z, t) point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseFields {
    pub a_x: f64,
    pub e_x: f64,
    pub b_y: f64,
}

impl LaserPulse {
    /// Builds a pulse from cycle counts. `turn_on_cycles` is rounded to the
    /// nearest (m + 0.25); `plateau_cycles` sets t_p - t_on.
    pub fn new(
        e0: f64,
        omega: f64,
        turn_on_cycles: f64,
        plateau_cycles: f64,
        c: f64,
        dipole: bool,
    ) -> Result<Self> {
        if !(e0 >= 0.0 && e0.is_finite()) {
            return Err(FwError::Config(format!("pulse E0 must be >= 0, got {e0}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(FwError::Config(format!("pulse omega must be positive, got {omega}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(FwError::Config(format!("speed of light must be positive, got {c}")));
        }
        if plateau_cycles < 0.0 {
            return Err(FwError::Config(format!(
                "plateau cycle count must be >= 0, got {plateau_cycles}"
            )));
        }
        let m = ((turn_on_cycles - 0.25).round().max(0.0)) as u64;
        let admissible = m as f64 + 0.25;
        let period = 2.0 * std::f64::consts::PI / omega;
        let t_on = admissible * period;
        let t_p = t_on + plateau_cycles * period;
        Ok(LaserPulse {
            e0,
            omega,
            t_on,
            t_p,
            c,
            turn_on_cycles: admissible,
            turn_on_adjustment: admissible - turn_on_cycles,
            dipole,
        })
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    /// A_x, E_x, B_y at (z, t). Retardation uses the pulse's own c; under the
    /// dipole approximation z is ignored.
    pub fn fields(&self, z: f64, t: f64) -> PulseFields {
        let tau = if self.dipole { t } else { t - z / self.c };
        if tau <= 0.0 || tau >= self.t_p {
            return PulseFields { a_x: 0.0, e_x: 0.0, b_y: 0.0 };
        }
        let phase = self.omega * tau;
        let (a_x, e_x);
        if tau <= self.t_on {
            a_x = -(self.c * self.e0 / (self.omega * self.t_on))
                * (tau * phase.sin() + phase.cos() / self.omega);
            e_x = self.e0 * (tau / self.t_on) * phase.cos();
        } else {
            a_x = -(self.c * self.e0 / self.omega) * phase.sin();
            e_x = self.e0 * phase.cos();
        }
        PulseFields { a_x, e_x, b_y: e_x }
    }

    pub fn a_x(&self, z: f64, t: f64) -> f64 {
        self.fields(z, t).a_x
    }

    pub fn e_x(&self, z: f64, t: f64) -> f64 {
        self.fields(z, t).e_x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::units::C_AU;

    fn pulse(cycles_on: f64, cycles_flat: f64) -> LaserPulse {
        LaserPulse::new(1.0, 0.5, cycles_on, cycles_flat, C_AU, false).unwrap()
    }

    #[test]
    fn turn_on_is_rounded_to_admissible_cycles() {
        let p = pulse(3.0, 10.0);
        assert_relative_eq!(p.turn_on_cycles, 3.25, epsilon = 1e-12);
        assert_relative_eq!(p.turn_on_adjustment, 0.25, epsilon = 1e-12);
        let p = pulse(5.25, 10.0);
        assert_relative_eq!(p.turn_on_cycles, 5.25, epsilon = 1e-12);
        assert_eq!(p.turn_on_adjustment, 0.0);
        // Small requests clamp to the first admissible value.
        let p = pulse(0.0, 1.0);
        assert_relative_eq!(p.turn_on_cycles, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn fields_start_at_zero_and_respect_causality() {
        let p = pulse(2.25, 5.0);
        let f = p.fields(0.0, 0.0);
        assert_eq!(f, PulseFields { a_x: 0.0, e_x: 0.0, b_y: 0.0 });
        // Positive z at small t is ahead of the causal front.
        let f = p.fields(10.0, 10.0 / C_AU * 0.5);
        assert_eq!(f.e_x, 0.0);
        assert_eq!(f.a_x, 0.0);
        // Behind the front the field is on.
        let f = p.fields(-5.0, 1.0);
        assert!(f.e_x != 0.0);
    }

    #[test]
    fn vector_potential_is_continuous_at_the_seam() {
        let p = pulse(2.25, 5.0);
        for &z in &[0.0, -3.0, 7.0] {
            let eps = 1e-9;
            let before = p.a_x(z, p.t_on + z / C_AU - eps);
            let after = p.a_x(z, p.t_on + z / C_AU + eps);
            assert_relative_eq!(before, after, epsilon = 1e-6 * p.e0 * C_AU / p.omega);
            // At the seam |E| = E0 |cos(omega t_on)| = 0 for admissible t_on.
            let e_seam = p.e_x(z, p.t_on + z / C_AU);
            assert!(e_seam.abs() < 1e-9 * p.e0);
        }
    }

    #[test]
    fn electric_equals_magnetic_everywhere() {
        let p = pulse(1.25, 4.0);
        for i in 0..200 {
            let t = 0.17 * i as f64;
            let z = -40.0 + 0.4 * i as f64;
            let f = p.fields(z, t);
            assert_eq!(f.e_x, f.b_y);
        }
    }

    #[test]
    fn e_is_minus_da_dt_over_c() {
        // The analytic derivative of A reproduces E on ramp and plateau.
        let p = pulse(2.25, 6.0);
        let h = 1e-6;
        for &t in &[p.t_on * 0.3, p.t_on * 0.9, p.t_on + 2.0, p.t_on + 20.0] {
            for &z in &[0.0, 2.5] {
                let da_dt = (p.a_x(z, t + h) - p.a_x(z, t - h)) / (2.0 * h);
                let e = p.e_x(z, t);
                assert_relative_eq!(-da_dt / C_AU, e, max_relative = 1e-6, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn fields_freeze_after_plateau() {
        let p = pulse(1.25, 3.0);
        let f = p.fields(0.0, p.t_p + 1e-9);
        assert_eq!(f, PulseFields { a_x: 0.0, e_x: 0.0, b_y: 0.0 });
    }

    #[test]
    fn dipole_mode_ignores_z() {
        let p = LaserPulse::new(0.7, 0.3, 1.25, 4.0, C_AU, true).unwrap();
        let t = 11.0;
        let f0 = p.fields(0.0, t);
        for &z in &[-30.0, -1.0, 4.0, 55.0] {
            assert_eq!(p.fields(z, t), f0);
        }
    }
}
