//! Uniform 2D coordinate/momentum lattice.
//!
//! x is the laser polarization direction, z the propagation direction.
//! The nucleus sits exactly on the grid point (0, 0); for an even point
//! count the coordinate lattice is x_i = (i - n/2) dx so extents are
//! symmetric up to one spacing, for an odd count exactly symmetric.
//! The momentum lattice follows the periodic FFT convention,
//! k_s = 2 pi s / (n dx) with signed integer s, spanning [-pi/dx, pi/dx).

use serde::{Deserialize, Serialize};

use crate::{FwError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub nz: usize,
    pub dx: f64,
    pub dz: f64,
    /// Coordinate lattices (length nx / nz), origin on-grid.
    #[serde(skip)]
    pub xs: Vec<f64>,
    #[serde(skip)]
    pub zs: Vec<f64>,
    /// Momentum lattices in FFT bin order (bin j holds k of signed index s_j).
    #[serde(skip)]
    pub kxs: Vec<f64>,
    #[serde(skip)]
    pub kzs: Vec<f64>,
}

fn coordinate_lattice(n: usize, d: f64) -> Vec<f64> {
    let shift = (n / 2) as isize;
    (0..n).map(|i| (i as isize - shift) as f64 * d).collect()
}

/// Signed FFT index of bin i: i for i < n/2 (rounding up for odd n), i - n after.
pub fn signed_index(i: usize, n: usize) -> isize {
    let half = n.div_ceil(2);
    if i < half {
        i as isize
    } else {
        i as isize - n as isize
    }
}

fn momentum_lattice(n: usize, d: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * d);
    (0..n).map(|i| signed_index(i, n) as f64 * dk).collect()
}

impl Grid2D {
    pub fn new(nx: usize, nz: usize, dx: f64, dz: f64) -> Result<Self> {
        if nx < 8 || nz < 8 {
            return Err(FwError::Config(format!(
                "grid too small to contain the origin region: nx={nx}, nz={nz} (need >= 8)"
            )));
        }
        if !(dx > 0.0 && dx.is_finite() && dz > 0.0 && dz.is_finite()) {
            return Err(FwError::Config(format!(
                "grid spacing must be positive, got dx={dx}, dz={dz}"
            )));
        }
        Ok(Grid2D {
            nx,
            nz,
            dx,
            dz,
            xs: coordinate_lattice(nx, dx),
            zs: coordinate_lattice(nz, dz),
            kxs: momentum_lattice(nx, dx),
            kzs: momentum_lattice(nz, dz),
        })
    }

    /// Rebuild the derived lattices after deserialization.
    pub fn rebuild(&mut self) {
        self.xs = coordinate_lattice(self.nx, self.dx);
        self.zs = coordinate_lattice(self.nz, self.dz);
        self.kxs = momentum_lattice(self.nx, self.dx);
        self.kzs = momentum_lattice(self.nz, self.dz);
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }
    pub fn x_max(&self) -> f64 {
        self.xs[self.nx - 1]
    }
    pub fn z_min(&self) -> f64 {
        self.zs[0]
    }
    pub fn z_max(&self) -> f64 {
        self.zs[self.nz - 1]
    }

    /// Area element dx * dz.
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dz
    }

    /// Momentum spacing 2 pi / (n d) along x.
    pub fn dkx(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.nx as f64 * self.dx)
    }
    pub fn dkz(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.nz as f64 * self.dz)
    }

    /// Index of the origin along x (x[ix0] == 0).
    pub fn ix0(&self) -> usize {
        self.nx / 2
    }
    pub fn iz0(&self) -> usize {
        self.nz / 2
    }

    /// True when the two grids describe the same lattice.
    pub fn same_lattice(&self, other: &Grid2D) -> bool {
        self.nx == other.nx
            && self.nz == other.nz
            && self.dx == other.dx
            && self.dz == other.dz
    }
}
