//! Soft-core binding potential of the ionic core and its derivatives.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::grid::Grid2D;
use crate::{FwError, Result};

/// V(x, z) = -k / sqrt(q_e + x^2 + z^2).
///
/// `k` sets the binding strength, `q_e > 0` softens the Coulomb singularity,
/// and `z_charge` is the nominal effective charge of the core (metadata).
/// Known parameter sets: (Z=12, k=80.32), (Z=3, k=6.48), (Z=4, k=10.7),
/// all with q_e = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftCorePotential {
    pub k: f64,
    pub q_e: f64,
    pub z_charge: i32,
}

impl SoftCorePotential {
    pub fn new(k: f64, q_e: f64, z_charge: i32) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(FwError::Config(format!("softcore k must be positive, got {k}")));
        }
        if !(q_e > 0.0 && q_e.is_finite()) {
            return Err(FwError::Config(format!("softcore q_e must be positive, got {q_e}")));
        }
        Ok(SoftCorePotential { k, q_e, z_charge })
    }

    pub fn value(&self, x: f64, z: f64) -> f64 {
        -self.k / (self.q_e + x * x + z * z).sqrt()
    }

    /// (dV/dx, dV/dz), finite everywhere because q_e > 0.
    pub fn gradient(&self, x: f64, z: f64) -> (f64, f64) {
        let s = self.q_e + x * x + z * z;
        let f = self.k * s.powf(-1.5);
        (f * x, f * z)
    }

    /// 2D Laplacian of V, used by the Darwin term.
    pub fn laplacian(&self, x: f64, z: f64) -> f64 {
        let r2 = x * x + z * z;
        let s = self.q_e + r2;
        2.0 * self.k * s.powf(-1.5) - 3.0 * self.k * r2 * s.powf(-2.5)
    }

    /// Spin-orbit radial prefactor f(x, z) = -k (q_e + x^2 + z^2)^(-3/2) / 4c^2.
    pub fn so_prefactor(&self, x: f64, z: f64, c: f64) -> f64 {
        -self.k * (self.q_e + x * x + z * z).powf(-1.5) / (4.0 * c * c)
    }

    pub fn sample_value(&self, grid: &Grid2D) -> Array2<f64> {
        Array2::from_shape_fn((grid.nx, grid.nz), |(i, j)| {
            self.value(grid.xs[i], grid.zs[j])
        })
    }

    pub fn sample_laplacian(&self, grid: &Grid2D) -> Array2<f64> {
        Array2::from_shape_fn((grid.nx, grid.nz), |(i, j)| {
            self.laplacian(grid.xs[i], grid.zs[j])
        })
    }

    pub fn sample_so_prefactor(&self, grid: &Grid2D, c: f64) -> Array2<f64> {
        Array2::from_shape_fn((grid.nx, grid.nz), |(i, j)| {
            self.so_prefactor(grid.xs[i], grid.zs[j], c)
        })
    }

    /// (-dV/dx, -dV/dz) sampled on the grid; the force entering the
    /// acceleration observable.
    pub fn sample_force(&self, grid: &Grid2D) -> (Array2<f64>, Array2<f64>) {
        let fx = Array2::from_shape_fn((grid.nx, grid.nz), |(i, j)| {
            -self.gradient(grid.xs[i], grid.zs[j]).0
        });
        let fz = Array2::from_shape_fn((grid.nx, grid.nz), |(i, j)| {
            -self.gradient(grid.xs[i], grid.zs[j]).1
        });
        (fx, fz)
    }

    /// Harmonic frequency of the well bottom, sqrt(k / q_e^(3/2)); used for
    /// rough ground-state size estimates.
    pub fn harmonic_frequency(&self) -> f64 {
        (self.k * self.q_e.powf(-1.5)).sqrt()
    }

    /// Rough ground-state radius estimate 1/sqrt(omega_harmonic).
    pub fn ground_radius_estimate(&self) -> f64 {
        1.0 / self.harmonic_frequency().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::units::C_AU;

    #[test]
    fn value_at_origin() {
        let p = SoftCorePotential::new(80.32, 1.0, 12).unwrap();
        assert_relative_eq!(p.value(0.0, 0.0), -80.32, epsilon = 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_origin() {
        let p = SoftCorePotential::new(80.32, 1.0, 12).unwrap();
        let (gx, gz) = p.gradient(0.0, 0.0);
        assert_eq!(gx, 0.0);
        assert_eq!(gz, 0.0);
    }

    #[test]
    fn gradient_matches_finite_difference_oracle() {
        let p = SoftCorePotential::new(80.32, 1.0, 12).unwrap();
        let (x, z) = (1.3, -2.7);
        let h = 1e-5;
        let fd_x = (p.value(x + h, z) - p.value(x - h, z)) / (2.0 * h);
        let fd_z = (p.value(x, z + h) - p.value(x, z - h)) / (2.0 * h);
        let (gx, gz) = p.gradient(x, z);
        assert_relative_eq!(gx, fd_x, epsilon = 1e-8);
        assert_relative_eq!(gz, fd_z, epsilon = 1e-8);
    }

    #[test]
    fn laplacian_matches_finite_difference_oracle() {
        let p = SoftCorePotential::new(6.48, 1.0, 3).unwrap();
        let (x, z) = (0.7, 1.1);
        let h = 1e-4;
        let fd = (p.value(x + h, z) + p.value(x - h, z) + p.value(x, z + h)
            + p.value(x, z - h)
            - 4.0 * p.value(x, z))
            / (h * h);
        assert_relative_eq!(p.laplacian(x, z), fd, max_relative = 1e-6);
    }

    #[test]
    fn so_prefactor_value_and_scaling() {
        let p = SoftCorePotential::new(80.32, 1.0, 12).unwrap();
        let f0 = p.so_prefactor(0.0, 0.0, C_AU);
        assert_relative_eq!(f0, -80.32 / (4.0 * C_AU * C_AU), epsilon = 1e-12);
        assert_relative_eq!(f0, -1.0695e-3, max_relative = 1e-3);
        // Monotone decay toward zero at large r.
        assert!(p.so_prefactor(5.0, 0.0, C_AU).abs() < f0.abs());
        assert!(p.so_prefactor(50.0, 0.0, C_AU).abs() < 1e-7);
        // Doubling c quarters f.
        let f2 = p.so_prefactor(1.0, 2.0, 2.0 * C_AU);
        let f1 = p.so_prefactor(1.0, 2.0, C_AU);
        assert_relative_eq!(f1 / f2, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn so_prefactor_equals_radial_derivative_identity() {
        // f = -(1/4c^2) (1/r) dV/dr, checked through the gradient.
        let p = SoftCorePotential::new(10.7, 1.0, 4).unwrap();
        let (x, z): (f64, f64) = (0.9, -1.7);
        let r = (x * x + z * z).sqrt();
        let (gx, gz) = p.gradient(x, z);
        let dv_dr = (gx * x + gz * z) / r;
        let lhs = p.so_prefactor(x, z, C_AU);
        let rhs = -dv_dr / r / (4.0 * C_AU * C_AU);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(SoftCorePotential::new(0.0, 1.0, 1).is_err());
        assert!(SoftCorePotential::new(1.0, 0.0, 1).is_err());
        assert!(SoftCorePotential::new(1.0, -1.0, 1).is_err());
    }
}
