//! Two-component spinor wavefunction on a shared 2D grid, with norms and
//! expectation values.

use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::fft::FftEngine;
use crate::grid::Grid2D;
use crate::{FwError, Result};

/// Which representation the stored arrays are currently in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Position,
    /// Fourier transformed along x only: (k_x, z).
    MomentumX,
    /// Fourier transformed along both axes: (k_x, k_z).
    Momentum2D,
}

/// Pauli matrices usable in expectation values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

#[derive(Clone)]
pub struct SpinorWavefunction {
    pub up: Array2<Complex64>,
    pub down: Array2<Complex64>,
    pub grid: Arc<Grid2D>,
    /// Current time in a.u.
    pub time: f64,
    pub rep: Representation,
}

impl SpinorWavefunction {
    pub fn zeros(grid: Arc<Grid2D>) -> Self {
        let shape = (grid.nx, grid.nz);
        SpinorWavefunction {
            up: Array2::default(shape),
            down: Array2::default(shape),
            grid,
            time: 0.0,
            rep: Representation::Position,
        }
    }

    /// Normalized Gaussian packet in the spin-up component:
    /// amplitude exp(-(x-x0)^2/(4 sx^2) - (z-z0)^2/(4 sz^2)) exp(i k.r),
    /// so sx, sz are the position-space standard deviations of |psi|^2.
    pub fn gaussian(
        grid: Arc<Grid2D>,
        center: (f64, f64),
        sigma: (f64, f64),
        momentum: (f64, f64),
    ) -> Self {
        let mut psi = Self::zeros(grid.clone());
        let (x0, z0) = center;
        let (sx, sz) = sigma;
        let (kx0, kz0) = momentum;
        for (ix, &x) in grid.xs.iter().enumerate() {
            for (iz, &z) in grid.zs.iter().enumerate() {
                let envelope =
                    (-((x - x0).powi(2)) / (4.0 * sx * sx) - (z - z0).powi(2) / (4.0 * sz * sz))
                        .exp();
                let phase = kx0 * x + kz0 * z;
                psi.up[[ix, iz]] = Complex64::from_polar(envelope, phase);
            }
        }
        psi.renormalize();
        psi
    }

    /// Plane wave exp(i(kx x + kz z)) in the spin-up component, normalized.
    pub fn plane_wave(grid: Arc<Grid2D>, kx0: f64, kz0: f64) -> Self {
        let mut psi = Self::zeros(grid.clone());
        for (ix, &x) in grid.xs.iter().enumerate() {
            for (iz, &z) in grid.zs.iter().enumerate() {
                psi.up[[ix, iz]] = Complex64::from_polar(1.0, kx0 * x + kz0 * z);
            }
        }
        psi.renormalize();
        psi
    }

    /// Builds a spinor from a scalar field placed in one or both components.
    pub fn from_scalar(
        grid: Arc<Grid2D>,
        field: Array2<Complex64>,
        spin: (Complex64, Complex64),
    ) -> Self {
        let mut psi = Self::zeros(grid);
        psi.up = field.mapv(|v| v * spin.0);
        psi.down = field.mapv(|v| v * spin.1);
        psi
    }

    /// Total probability sum(|up|^2 + |down|^2) dx dz. Representation
    /// independent under the unitary transform convention.
    pub fn norm(&self) -> f64 {
        let s: f64 = self
            .up
            .iter()
            .map(|c| c.norm_sqr())
            .chain(self.down.iter().map(|c| c.norm_sqr()))
            .sum();
        s * self.grid.cell_area()
    }

    /// Probability in the spin-down component.
    pub fn spin_down_population(&self) -> f64 {
        let s: f64 = self.down.iter().map(|c| c.norm_sqr()).sum();
        s * self.grid.cell_area()
    }

    pub fn renormalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let s = Complex64::from(1.0 / n.sqrt());
            self.up.mapv_inplace(|v| v * s);
            self.down.mapv_inplace(|v| v * s);
        }
    }

    /// <self|other> over both spin components.
    pub fn inner(&self, other: &SpinorWavefunction) -> Complex64 {
        debug_assert!(self.grid.same_lattice(&other.grid));
        debug_assert_eq!(self.rep, other.rep);
        let mut acc = Complex64::default();
        Zip::from(&self.up).and(&other.up).for_each(|a, b| {
            acc += a.conj() * b;
        });
        Zip::from(&self.down).and(&other.down).for_each(|a, b| {
            acc += a.conj() * b;
        });
        acc * self.grid.cell_area()
    }

    /// Expectation of a position-diagonal observable f(x, z), identity in spin.
    pub fn expectation_position<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        assert_eq!(self.rep, Representation::Position, "needs position representation");
        let mut acc = 0.0;
        for (ix, &x) in self.grid.xs.iter().enumerate() {
            for (iz, &z) in self.grid.zs.iter().enumerate() {
                let dens = self.up[[ix, iz]].norm_sqr() + self.down[[ix, iz]].norm_sqr();
                acc += f(x, z) * dens;
            }
        }
        acc * self.grid.cell_area()
    }

    /// Expectation of a momentum-diagonal observable g(k_x, k_z), identity in
    /// spin. Transforms a copy; the wavefunction itself is untouched.
    pub fn expectation_momentum<F: Fn(f64, f64) -> f64>(&self, engine: &FftEngine, g: F) -> f64 {
        assert_eq!(self.rep, Representation::Position, "needs position representation");
        let mut acc = 0.0;
        for field in [&self.up, &self.down] {
            if field.iter().all(|c| c.norm_sqr() == 0.0) {
                continue;
            }
            let mut tmp = field.clone();
            engine.forward_2d(&mut tmp);
            for (ix, &kx) in self.grid.kxs.iter().enumerate() {
                for (iz, &kz) in self.grid.kzs.iter().enumerate() {
                    acc += g(kx, kz) * tmp[[ix, iz]].norm_sqr();
                }
            }
        }
        acc * self.grid.cell_area()
    }

    /// Expectation of sigma_i times a position-diagonal weight f(x, z).
    pub fn expectation_spin<F: Fn(f64, f64) -> f64>(&self, pauli: Pauli, f: F) -> f64 {
        assert_eq!(self.rep, Representation::Position, "needs position representation");
        let mut acc = 0.0;
        for (ix, &x) in self.grid.xs.iter().enumerate() {
            for (iz, &z) in self.grid.zs.iter().enumerate() {
                let u = self.up[[ix, iz]];
                let d = self.down[[ix, iz]];
                let val = match pauli {
                    // psi^dag sigma_x psi = 2 Re(u* d)
                    Pauli::X => 2.0 * (u.conj() * d).re,
                    // psi^dag sigma_y psi = 2 Im(u* d)
                    Pauli::Y => 2.0 * (u.conj() * d).im,
                    Pauli::Z => u.norm_sqr() - d.norm_sqr(),
                };
                acc += f(x, z) * val;
            }
        }
        acc * self.grid.cell_area()
    }

    /// Re<psi|phi> for phi = O psi computed elsewhere, with a Hermiticity
    /// check: an imaginary residue above 1e-8 times the natural scale signals
    /// a broken operator construction.
    pub fn expectation_applied(&self, applied: &SpinorWavefunction) -> Result<f64> {
        let v = self.inner(applied);
        let scale = (self.norm() * applied.norm()).sqrt().max(f64::MIN_POSITIVE);
        if v.im.abs() > 1e-8 * scale.max(v.re.abs()) {
            return Err(FwError::NonHermitian {
                residue: v.im.abs(),
                tolerance: 1e-8 * scale,
            });
        }
        Ok(v.re)
    }

    /// <x> and <z>, optionally restricted to a window around the core
    /// (renormalized by the in-window probability).
    pub fn center_of_mass(&self, window: Option<(f64, f64)>) -> (f64, f64) {
        assert_eq!(self.rep, Representation::Position);
        let mut wx = 0.0;
        let mut wz = 0.0;
        let mut wn = 0.0;
        for (ix, &x) in self.grid.xs.iter().enumerate() {
            for (iz, &z) in self.grid.zs.iter().enumerate() {
                if let Some((hx, hz)) = window {
                    if x.abs() > hx || z.abs() > hz {
                        continue;
                    }
                }
                let dens = self.up[[ix, iz]].norm_sqr() + self.down[[ix, iz]].norm_sqr();
                wx += x * dens;
                wz += z * dens;
                wn += dens;
            }
        }
        if window.is_some() && wn > 0.0 {
            (wx / wn, wz / wn)
        } else {
            let a = self.grid.cell_area();
            let n = self.norm().max(f64::MIN_POSITIVE);
            (wx * a / n, wz * a / n)
        }
    }

    /// Parity overlaps (<P_x>, <P_z>) of the total density, in [-1, 1].
    /// +1 means even, -1 odd. The unpaired edge row of an even-sized grid is
    /// skipped.
    pub fn parity(&self) -> (f64, f64) {
        assert_eq!(self.rep, Representation::Position);
        let nx = self.grid.nx;
        let nz = self.grid.nz;
        let mut px = Complex64::default();
        let mut pz = Complex64::default();
        let mut nsq = 0.0;
        for field in [&self.up, &self.down] {
            for ix in 1..nx {
                for iz in 1..nz {
                    let v = field[[ix, iz]];
                    nsq += v.norm_sqr();
                    px += v.conj() * field[[nx - ix, iz]];
                    pz += v.conj() * field[[ix, nz - iz]];
                }
            }
        }
        if nsq == 0.0 {
            return (0.0, 0.0);
        }
        (px.re / nsq, pz.re / nsq)
    }

    pub fn to_momentum_x(&mut self, engine: &FftEngine) {
        assert_eq!(self.rep, Representation::Position);
        engine.forward_x(&mut self.up);
        engine.forward_x(&mut self.down);
        self.rep = Representation::MomentumX;
    }

    pub fn to_position_from_momentum_x(&mut self, engine: &FftEngine) {
        assert_eq!(self.rep, Representation::MomentumX);
        engine.inverse_x(&mut self.up);
        engine.inverse_x(&mut self.down);
        self.rep = Representation::Position;
    }

    pub fn to_momentum_2d(&mut self, engine: &FftEngine) {
        assert_eq!(self.rep, Representation::Position);
        engine.forward_2d(&mut self.up);
        engine.forward_2d(&mut self.down);
        self.rep = Representation::Momentum2D;
    }

    pub fn to_position_from_momentum_2d(&mut self, engine: &FftEngine) {
        assert_eq!(self.rep, Representation::Momentum2D);
        engine.inverse_2d(&mut self.up);
        engine.inverse_2d(&mut self.down);
        self.rep = Representation::Position;
    }
}
