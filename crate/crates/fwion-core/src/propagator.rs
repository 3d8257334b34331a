//! Split-operator time step under the weakly relativistic two-component
//! Hamiltonian.
//!
//! One step applies, symmetrically in time,
//!   exp[-i dt (p^2/4 - p^4/16c^2)]                  (2D momentum diagonal)
//!   exp[-i dt/2 p_x A_x(z,t)/c]                     (mixed (k_x, z) diagonal)
//!   exp[-i dt/2 (V + w A^2/c^2 + H_D)]              (position diagonal)
//!   exp[-i dt (H_P + H_so)]                         (Taylor to second order)
//!   exp[-i dt/2 (V + w A^2/c^2 + H_D)]
//!   exp[-i dt/2 p_x A_x(z,t)/c]
//!   exp[-i dt (p^2/4 - p^4/16c^2)]
//! with every time-dependent factor evaluated at the midpoint t + dt/2.
//! The palindromic factor order keeps the update time symmetric, so a +dt
//! step followed by a -dt step restores the state and the global error is
//! O(dt^2). The p^4 part of the kinetic phase is present iff the mass-shift
//! toggle is on; H_D reduces to -lap(V)/8c^2 for the plane-wave pulse.
//!
//! The spin block couples the components through sigma_y alone:
//!   W = B_y/2c - E_x p_z / 4c^2 + f(x,z) (z p_x - x p_z),
//! exp(-i dt sigma_y W) expanded to second order in dt, momenta applied
//! spectrally and field/position factors kept left of the momentum operators.

use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::fft::FftEngine;
use crate::grid::Grid2D;
use crate::potential::SoftCorePotential;
use crate::pulse::LaserPulse;
use crate::spinor::{Representation, SpinorWavefunction};
use crate::toggles::TermToggles;
use crate::{FwError, Result};

type CField = Array2<Complex64>;

/// cos^(1/8) absorbing mask bands at the box edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskFunction {
    /// Band width from the x edges, in bohr. Zero disables absorption along x.
    pub width_x: f64,
    /// Band width from the z edges.
    pub width_z: f64,
}

pub const MASK_EXPONENT: f64 = 0.125;

impl MaskFunction {
    /// Default bands covering 10% of the box extent per side.
    pub fn default_for(grid: &Grid2D) -> Self {
        MaskFunction {
            width_x: 0.1 * (grid.x_max() - grid.x_min()),
            width_z: 0.1 * (grid.z_max() - grid.z_min()),
        }
    }

    fn profile(coords: &[f64], width: f64) -> Vec<f64> {
        let lo = coords[0];
        let hi = coords[coords.len() - 1];
        coords
            .iter()
            .map(|&q| {
                if width <= 0.0 {
                    return 1.0;
                }
                let d = (q - lo).min(hi - q);
                if d >= width {
                    1.0
                } else {
                    let theta = std::f64::consts::FRAC_PI_2 * (1.0 - d / width);
                    theta.cos().powf(MASK_EXPONENT)
                }
            })
            .collect()
    }

    pub fn sample(&self, grid: &Grid2D) -> Result<SampledMask> {
        let half_x = 0.5 * (grid.x_max() - grid.x_min());
        let half_z = 0.5 * (grid.z_max() - grid.z_min());
        if self.width_x < 0.0 || self.width_z < 0.0 {
            return Err(FwError::Config("mask widths must be >= 0".into()));
        }
        if self.width_x > half_x || self.width_z > half_z {
            return Err(FwError::Config(format!(
                "mask widths ({}, {}) exceed half the box extents ({half_x}, {half_z})",
                self.width_x, self.width_z
            )));
        }
        Ok(SampledMask {
            mx: Self::profile(&grid.xs, self.width_x),
            mz: Self::profile(&grid.zs, self.width_z),
        })
    }
}

/// Mask profile sampled on the grid (separable product mx[ix] * mz[iz]).
#[derive(Debug, Clone)]
pub struct SampledMask {
    pub mx: Vec<f64>,
    pub mz: Vec<f64>,
}

struct SpinWorkspace {
    px: CField,
    pz: CField,
    phi_up: CField,
    phi_down: CField,
    w2_up: CField,
    w2_down: CField,
}

/// Cached phase tables and scratch space for stepping one configuration.
pub struct PropagatorPlan {
    pub grid: Arc<Grid2D>,
    pub dt: f64,
    pub toggles: TermToggles,
    pub pulse: Option<LaserPulse>,
    engine: FftEngine,
    /// exp[-i dt (k^2/4 - k^4/16c^2)] over (k_x, k_z).
    kinetic_half: CField,
    /// exp[-i dt/2 (V + H_D)] over (x, z).
    pos_static_half: CField,
    /// f(x, z) when spin-orbit is active.
    so_factor: Option<Array2<f64>>,
    mask: Option<SampledMask>,
    // Per-step vectors over z, rebuilt each step from the pulse.
    a_vec: Vec<f64>,
    e_vec: Vec<f64>,
    a2_phase: Vec<Complex64>,
    spin_ws: Option<SpinWorkspace>,
}

impl PropagatorPlan {
    pub fn new(
        grid: Arc<Grid2D>,
        potential: Option<&SoftCorePotential>,
        pulse: Option<LaserPulse>,
        toggles: TermToggles,
        dt: f64,
        mask: Option<MaskFunction>,
    ) -> Result<Self> {
        let v = potential.map(|p| p.sample_value(&grid));
        let lap = potential.map(|p| p.sample_laplacian(&grid));
        let so = potential.map(|p| p.sample_so_prefactor(&grid, toggles.c()));
        Self::from_tables(grid, v, lap, so, pulse, toggles, dt, mask)
    }

    /// Lower-level constructor taking sampled potential tables directly;
    /// used for substituted potentials in validation runs.
    #[allow(clippy::too_many_arguments)]
    pub fn from_tables(
        grid: Arc<Grid2D>,
        v: Option<Array2<f64>>,
        v_laplacian: Option<Array2<f64>>,
        so_factor: Option<Array2<f64>>,
        mut pulse: Option<LaserPulse>,
        toggles: TermToggles,
        dt: f64,
        mask: Option<MaskFunction>,
    ) -> Result<Self> {
        toggles.validate()?;
        if dt == 0.0 || !dt.is_finite() {
            return Err(FwError::Config(format!("dt must be nonzero and finite, got {dt}")));
        }
        let c = toggles.c();
        if let Some(p) = pulse.as_mut() {
            if (p.c - c).abs() > 1e-9 * c {
                return Err(FwError::Config(format!(
                    "pulse was built with c={} but the toggles demand c={}",
                    p.c, c
                )));
            }
            p.dipole = toggles.dipole_approximation;
        }

        let shape = (grid.nx, grid.nz);
        let mut kinetic_half = CField::default(shape);
        for (ix, &kx) in grid.kxs.iter().enumerate() {
            for (iz, &kz) in grid.kzs.iter().enumerate() {
                let k2 = kx * kx + kz * kz;
                let mut phase = -dt * k2 / 4.0;
                if toggles.mass_shift {
                    phase += dt * k2 * k2 / (16.0 * c * c);
                }
                kinetic_half[[ix, iz]] = Complex64::from_polar(1.0, phase);
            }
        }

        let mut pos_static_half = CField::from_elem(shape, Complex64::new(1.0, 0.0));
        if let Some(v) = &v {
            for ix in 0..grid.nx {
                for iz in 0..grid.nz {
                    let mut h = v[[ix, iz]];
                    if toggles.darwin {
                        // H_D = div E'/8c^2 with div E_laser = 0 for the
                        // plane-wave pulse, leaving -lap(V)/8c^2.
                        let lap = v_laplacian.as_ref().map_or(0.0, |l| l[[ix, iz]]);
                        h -= lap / (8.0 * c * c);
                    }
                    pos_static_half[[ix, iz]] = Complex64::from_polar(1.0, -0.5 * dt * h);
                }
            }
        }

        let sampled_mask = mask.map(|m| m.sample(&grid)).transpose()?;
        let spin_ws = toggles.spin_active().then(|| SpinWorkspace {
            px: CField::default(shape),
            pz: CField::default(shape),
            phi_up: CField::default(shape),
            phi_down: CField::default(shape),
            w2_up: CField::default(shape),
            w2_down: CField::default(shape),
        });

        Ok(PropagatorPlan {
            engine: FftEngine::new(&grid),
            dt,
            toggles,
            pulse,
            kinetic_half,
            pos_static_half,
            so_factor: if toggles.spin_orbit { so_factor } else { None },
            mask: sampled_mask,
            a_vec: vec![0.0; grid.nz],
            e_vec: vec![0.0; grid.nz],
            a2_phase: vec![Complex64::new(1.0, 0.0); grid.nz],
            spin_ws,
            grid,
        })
    }

    pub fn engine(&self) -> &FftEngine {
        &self.engine
    }

    pub fn has_absorber(&self) -> bool {
        self.mask.is_some()
    }

    /// Advances psi by one step of dt. psi must be in position representation.
    pub fn step(&mut self, psi: &mut SpinorWavefunction) -> Result<()> {
        if !psi.grid.same_lattice(&self.grid) {
            return Err(FwError::Config("wavefunction grid does not match the plan".into()));
        }
        assert_eq!(psi.rep, Representation::Position);
        let t_mid = psi.time + 0.5 * self.dt;
        self.refresh_pulse_vectors(t_mid);
        let has_field = self.pulse.is_some() && self.a_vec.iter().any(|&a| a != 0.0);
        let c = self.toggles.c();
        // Phase chain exponent per signed k_x index: exp(i q a[z] s).
        let q = -0.5 * self.dt * self.grid.dkx() / c;

        // An identically zero spin-down component stays zero under every
        // diagonal factor; skip its transforms until the spin block fills it.
        let mut down_live = field_is_live(&psi.down);

        let half = |engine: &FftEngine, field: &mut CField| {
            engine.forward_2d(field);
            multiply_table(field, &self.kinetic_half);
            if has_field {
                engine.inverse_z(field);
                apply_mixed_phase(field, &self.a_vec, q);
                engine.inverse_x(field);
            } else {
                engine.inverse_2d(field);
            }
            multiply_table_zvec(field, &self.pos_static_half, &self.a2_phase);
        };
        half(&self.engine, &mut psi.up);
        if down_live {
            half(&self.engine, &mut psi.down);
        }

        if self.toggles.spin_active() {
            self.apply_spin_block(psi, t_mid);
            down_live = field_is_live(&psi.down);
        }

        // Mirror of the first half.
        let mirror = |engine: &FftEngine, field: &mut CField| {
            multiply_table_zvec(field, &self.pos_static_half, &self.a2_phase);
            if has_field {
                engine.forward_x(field);
                apply_mixed_phase(field, &self.a_vec, q);
                engine.forward_z(field);
            } else {
                engine.forward_2d(field);
            }
            multiply_table(field, &self.kinetic_half);
            engine.inverse_2d(field);
        };
        mirror(&self.engine, &mut psi.up);
        if down_live {
            mirror(&self.engine, &mut psi.down);
        }

        psi.time += self.dt;
        Ok(())
    }

    /// Rebuilds the z-dependent pulse vectors at time t.
    fn refresh_pulse_vectors(&mut self, t: f64) {
        let c = self.toggles.c();
        let w_a2 = if self.toggles.a2_half_factor { 0.5 } else { 1.0 };
        match &self.pulse {
            Some(p) => {
                for (iz, &z) in self.grid.zs.iter().enumerate() {
                    let f = p.fields(z, t);
                    self.a_vec[iz] = f.a_x;
                    self.e_vec[iz] = f.e_x;
                    self.a2_phase[iz] =
                        Complex64::from_polar(1.0, -0.5 * self.dt * w_a2 * f.a_x * f.a_x / (c * c));
                }
            }
            None => {
                self.a_vec.fill(0.0);
                self.e_vec.fill(0.0);
                self.a2_phase.fill(Complex64::new(1.0, 0.0));
            }
        }
    }

    /// exp[-i dt (H_P + H_so)] by a second-order Taylor expansion. Public so
    /// the spin channel can be exercised in isolation; `t_mid` is the time at
    /// which the pulse fields are sampled.
    pub fn apply_spin_block(&mut self, psi: &mut SpinorWavefunction, t_mid: f64) {
        self.refresh_pulse_vectors(t_mid);
        let dt = self.dt;
        let c = self.toggles.c();
        let ctx = SpinContext {
            engine: &self.engine,
            grid: &self.grid,
            pauli: self.toggles.pauli,
            spin_orbit: self.toggles.spin_orbit,
            so_factor: self.so_factor.as_ref(),
            b_over_2c: self
                .e_vec
                .iter()
                .map(|&e| e / (2.0 * c)) // B_y = E_x for this pulse
                .collect(),
            e_over_4c2: self.e_vec.iter().map(|&e| e / (4.0 * c * c)).collect(),
        };
        let ws = self
            .spin_ws
            .as_mut()
            .expect("spin workspace allocated when spin toggles are active");
        let down_live = field_is_live(&psi.down);

        apply_w(&ctx, &psi.up, &mut ws.phi_up, &mut ws.px, &mut ws.pz);
        apply_w(&ctx, &ws.phi_up, &mut ws.w2_up, &mut ws.px, &mut ws.pz);
        if down_live {
            apply_w(&ctx, &psi.down, &mut ws.phi_down, &mut ws.px, &mut ws.pz);
            apply_w(&ctx, &ws.phi_down, &mut ws.w2_down, &mut ws.px, &mut ws.pz);
        }

        let half_dt2 = 0.5 * dt * dt;
        if down_live {
            Zip::from(&mut psi.up)
                .and(&ws.phi_down)
                .and(&ws.w2_up)
                .for_each(|u, &pd, &wu| {
                    *u = *u - dt * pd - half_dt2 * wu;
                });
            Zip::from(&mut psi.down)
                .and(&ws.phi_up)
                .and(&ws.w2_down)
                .for_each(|d, &pu, &wd| {
                    *d = *d + dt * pu - half_dt2 * wd;
                });
        } else {
            Zip::from(&mut psi.up).and(&ws.w2_up).for_each(|u, &wu| {
                *u = *u - half_dt2 * wu;
            });
            Zip::from(&mut psi.down).and(&ws.phi_up).for_each(|d, &pu| {
                *d = dt * pu;
            });
        }
    }

    /// Multiplies psi by the mask; the removed amplitude (1 - m) psi goes to
    /// `flux` when provided. Returns the removed probability as the exact
    /// norm difference, so absorbed probability and in-box norm telescope.
    pub fn apply_absorber(
        &self,
        psi: &mut SpinorWavefunction,
        flux: Option<&mut SpinorWavefunction>,
    ) -> f64 {
        let Some(mask) = &self.mask else {
            return 0.0;
        };
        let norm_before = psi.norm();
        let down_live = field_is_live(&psi.down);
        match flux {
            Some(f) => {
                f.time = psi.time;
                f.rep = psi.rep;
                mask_apply_with_flux(&mut psi.up, &mut f.up, mask);
                if down_live {
                    mask_apply_with_flux(&mut psi.down, &mut f.down, mask);
                } else {
                    f.down.fill(Complex64::default());
                }
            }
            None => {
                mask_apply(&mut psi.up, mask);
                if down_live {
                    mask_apply(&mut psi.down, mask);
                }
            }
        }
        norm_before - psi.norm()
    }

    /// Aborts with a diagnostic when the state has gone non-finite.
    pub fn check_finite(psi: &SpinorWavefunction) -> Result<()> {
        let bad = psi
            .up
            .iter()
            .chain(psi.down.iter())
            .any(|c| !c.re.is_finite() || !c.im.is_finite());
        if bad {
            return Err(FwError::Numerical(format!(
                "NaN/Inf in wavefunction at t = {:.6}; the step is too large or the grid too coarse",
                psi.time
            )));
        }
        Ok(())
    }
}

struct SpinContext<'a> {
    engine: &'a FftEngine,
    grid: &'a Grid2D,
    pauli: bool,
    spin_orbit: bool,
    so_factor: Option<&'a Array2<f64>>,
    b_over_2c: Vec<f64>,
    e_over_4c2: Vec<f64>,
}

/// dst = W src with W = B/2c - (E/4c^2) p_z + f (z p_x - x p_z).
fn apply_w(ctx: &SpinContext, src: &CField, dst: &mut CField, px: &mut CField, pz: &mut CField) {
    if ctx.spin_orbit {
        ctx.engine.apply_px(src, ctx.grid, px);
        ctx.engine.apply_pz(src, ctx.grid, pz);
        let f = ctx.so_factor.expect("spin-orbit prefactor table");
        let xs = &ctx.grid.xs;
        let zs = &ctx.grid.zs;
        for (ix, (((mut drow, srow), pxrow), pzrow)) in dst
            .outer_iter_mut()
            .zip(src.outer_iter())
            .zip(px.outer_iter())
            .zip(pz.outer_iter())
            .enumerate()
        {
            let x = xs[ix];
            let frow = f.row(ix);
            for (iz, d) in drow.iter_mut().enumerate() {
                let mut acc = frow[iz] * (zs[iz] * pxrow[iz] - x * pzrow[iz]);
                if ctx.pauli {
                    acc += ctx.b_over_2c[iz] * srow[iz];
                }
                acc -= ctx.e_over_4c2[iz] * pzrow[iz];
                *d = acc;
            }
        }
    } else {
        // Pauli only: W is position diagonal.
        for (mut drow, srow) in dst.outer_iter_mut().zip(src.outer_iter()) {
            for ((d, &s), &b) in drow.iter_mut().zip(srow.iter()).zip(ctx.b_over_2c.iter()) {
                *d = b * s;
            }
        }
    }
}

/// True when the field holds any nonzero amplitude. Short-circuits at the
/// first live element, so the scan is free for active components.
fn field_is_live(field: &CField) -> bool {
    field.iter().any(|c| c.re != 0.0 || c.im != 0.0)
}

fn mask_apply(field: &mut CField, mask: &SampledMask) {
    for (ix, mut row) in field.outer_iter_mut().enumerate() {
        let mx = mask.mx[ix];
        for (v, &mz) in row.iter_mut().zip(mask.mz.iter()) {
            *v *= mx * mz;
        }
    }
}

fn mask_apply_with_flux(field: &mut CField, flux: &mut CField, mask: &SampledMask) {
    for ((ix, mut row), mut frow) in field
        .outer_iter_mut()
        .enumerate()
        .zip(flux.outer_iter_mut())
    {
        let mx = mask.mx[ix];
        for ((v, fv), &mz) in row.iter_mut().zip(frow.iter_mut()).zip(mask.mz.iter()) {
            let m = mx * mz;
            *fv = (1.0 - m) * *v;
            *v *= m;
        }
    }
}

fn multiply_table(field: &mut CField, table: &CField) {
    Zip::from(field).and(table).for_each(|f, &t| *f *= t);
}

fn multiply_table_zvec(field: &mut CField, table: &CField, zvec: &[Complex64]) {
    Zip::from(field.outer_iter_mut())
        .and(table.outer_iter())
        .for_each(|mut frow, trow| {
            for ((f, &t), &v) in frow.iter_mut().zip(trow.iter()).zip(zvec.iter()) {
                *f *= t * v;
            }
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::C_AU;
    use approx::assert_relative_eq;

    fn free_plan(toggles: TermToggles, dt: f64) -> (Arc<Grid2D>, PropagatorPlan) {
        let grid = Arc::new(Grid2D::new(32, 16, 0.5, 0.5).unwrap());
        let plan =
            PropagatorPlan::new(grid.clone(), None, None, toggles, dt, None).unwrap();
        (grid, plan)
    }

    fn phase_advance(toggles: TermToggles, n: usize, dt: f64) -> (f64, f64) {
        let (grid, mut plan) = free_plan(toggles, dt);
        let k0 = grid.kxs[3];
        let psi0 = SpinorWavefunction::plane_wave(grid, k0, 0.0);
        let mut psi = psi0.clone();
        for _ in 0..n {
            plan.step(&mut psi).unwrap();
        }
        let overlap = psi0.inner(&psi);
        (overlap.arg(), k0)
    }

    #[test]
    fn free_dispersion_matches_kinetic_phase() {
        let dt = 0.01;
        let n = 10;
        let (phase, k0) = phase_advance(TermToggles::default(), n, dt);
        let expected = -(n as f64) * dt * 0.5 * k0 * k0;
        assert_relative_eq!(phase, expected, epsilon = 1e-10);
    }

    #[test]
    fn mass_shift_adds_quartic_dispersion() {
        // Oracle: the kinetic exponent is k^2/2 - k^4/8c^2 per unit time, and
        // the quartic piece appears iff the toggle is on.
        let dt = 0.01;
        let n = 10;
        let toggles = TermToggles {
            mass_shift: true,
            ..Default::default()
        };
        let (phase, k0) = phase_advance(toggles, n, dt);
        let expected =
            -(n as f64) * dt * (0.5 * k0 * k0 - k0.powi(4) / (8.0 * C_AU * C_AU));
        assert_relative_eq!(phase, expected, epsilon = 1e-10);
        let (phase_off, _) = phase_advance(TermToggles::default(), n, dt);
        assert!((phase - phase_off).abs() > 1e-12);
    }

    #[test]
    fn pauli_block_matches_exact_rotation() {
        // Uniform B via the dipole pulse; one spin block must rotate the
        // populations like the exact 2x2 rotation to O(theta^3).
        let grid = Arc::new(Grid2D::new(16, 16, 0.5, 0.5).unwrap());
        let toggles = TermToggles {
            pauli: true,
            dipole_approximation: true,
            ..Default::default()
        };
        let dt = 8.0;
        let pulse = LaserPulse::new(1.0, 0.5, 1.25, 6.0, C_AU, true).unwrap();
        let mut plan = PropagatorPlan::new(
            grid.clone(),
            None,
            Some(pulse),
            toggles,
            dt,
            None,
        )
        .unwrap();
        let t_mid = pulse.t_on + 2.0;
        let b = pulse.e_x(0.0, t_mid);
        assert!(b.abs() > 0.1);
        let theta = dt * b / (2.0 * C_AU);

        let mut psi =
            SpinorWavefunction::gaussian(grid, (0.0, 0.0), (1.0, 1.0), (0.0, 0.0));
        plan.apply_spin_block(&mut psi, t_mid);
        let p_up = psi.norm() - psi.spin_down_population();
        assert_relative_eq!(
            p_up,
            theta.cos().powi(2),
            epsilon = theta.abs().powi(3)
        );
    }

    #[test]
    fn spin_orbit_first_order_change_is_antisymmetric() {
        // Field-free instant: W = f L_y on a real even Gaussian produces a
        // spin-down amplitude odd in both x and z.
        let grid = Arc::new(Grid2D::new(48, 48, 0.4, 0.4).unwrap());
        let p = SoftCorePotential::new(6.48, 1.0, 3).unwrap();
        let toggles = TermToggles {
            spin_orbit: true,
            ..Default::default()
        };
        let mut plan =
            PropagatorPlan::new(grid.clone(), Some(&p), None, toggles, 1e-3, None).unwrap();
        // Narrow packet: the unpaired FFT edge column must stay empty for the
        // discrete parity comparison.
        let mut psi =
            SpinorWavefunction::gaussian(grid.clone(), (0.0, 0.0), (0.8, 0.8), (0.0, 0.0));
        plan.apply_spin_block(&mut psi, 0.0);
        let d = &psi.down;
        let n = grid.nx;
        for ix in 1..n {
            for iz in 1..n {
                let a = d[[ix, iz]];
                let bx = d[[n - ix, iz]];
                let bz = d[[ix, n - iz]];
                assert!((a + bx).norm() < 1e-12, "not odd in x at {ix},{iz}");
                assert!((a + bz).norm() < 1e-12, "not odd in z at {ix},{iz}");
            }
        }
    }

    #[test]
    fn absorber_bookkeeping_is_exact() {
        let grid = Arc::new(Grid2D::new(64, 16, 0.5, 0.5).unwrap());
        let toggles = TermToggles::default();
        let mask = MaskFunction {
            width_x: 4.0,
            width_z: 0.0,
        };
        let mut plan =
            PropagatorPlan::new(grid.clone(), None, None, toggles, 0.05, Some(mask)).unwrap();

        // Interior packet: nothing to absorb.
        let mut psi =
            SpinorWavefunction::gaussian(grid.clone(), (0.0, 0.0), (1.0, 1.0), (0.0, 0.0));
        let mut flux = SpinorWavefunction::zeros(grid.clone());
        let removed = plan.apply_absorber(&mut psi, Some(&mut flux));
        assert!(removed.abs() < 1e-12);
        assert!(flux.norm() < 1e-12);

        // Traveling packet: removed probability telescopes against the
        // remaining norm while it crosses the boundary.
        let mut psi =
            SpinorWavefunction::gaussian(grid.clone(), (8.0, 0.0), (1.5, 1.5), (2.0, 0.0));
        let mut cumulative = 0.0;
        for _ in 0..120 {
            plan.step(&mut psi).unwrap();
            cumulative += plan.apply_absorber(&mut psi, Some(&mut flux));
        }
        assert!(cumulative > 0.5, "packet should have been absorbed");
        assert_relative_eq!(cumulative + psi.norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn zero_width_mask_is_identity() {
        let grid = Arc::new(Grid2D::new(16, 16, 0.5, 0.5).unwrap());
        let mask = MaskFunction {
            width_x: 0.0,
            width_z: 0.0,
        };
        let mut plan =
            PropagatorPlan::new(grid.clone(), None, None, TermToggles::default(), 0.1, Some(mask))
                .unwrap();
        let mut psi =
            SpinorWavefunction::gaussian(grid.clone(), (2.0, -1.0), (1.0, 1.0), (0.0, 0.0));
        let before = psi.clone();
        let removed = plan.apply_absorber(&mut psi, None);
        assert_eq!(removed, 0.0);
        assert_eq!(psi.up, before.up);
    }

    #[test]
    fn step_is_time_reversible() {
        // Palindromic factor ordering: +dt then -dt restores the state to
        // 1e-10 even with every term switched on and the pulse active.
        let grid = Arc::new(Grid2D::new(48, 48, 0.3, 0.3).unwrap());
        let p = SoftCorePotential::new(6.48, 1.0, 3).unwrap();
        let toggles = TermToggles::all_on();
        let dt = 1e-3;
        let pulse = LaserPulse::new(0.5, 0.5, 1.25, 5.0, C_AU, false).unwrap();
        let mut fwd =
            PropagatorPlan::new(grid.clone(), Some(&p), Some(pulse), toggles, dt, None).unwrap();
        let mut bwd =
            PropagatorPlan::new(grid.clone(), Some(&p), Some(pulse), toggles, -dt, None).unwrap();

        let mut psi =
            SpinorWavefunction::gaussian(grid.clone(), (0.6, -0.4), (1.0, 1.3), (0.4, 0.0));
        psi.time = 18.0; // mid-plateau so every interaction term is live
        let original = psi.clone();
        fwd.step(&mut psi).unwrap();
        bwd.step(&mut psi).unwrap();
        let err = psi
            .up
            .iter()
            .zip(original.up.iter())
            .chain(psi.down.iter().zip(original.down.iter()))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        assert!(err < 1e-10, "reversibility error {err}");
        assert_relative_eq!(psi.time, original.time, epsilon = 1e-12);
    }

    #[test]
    fn nan_guard_reports_diagnostic() {
        let grid = Arc::new(Grid2D::new(16, 16, 0.5, 0.5).unwrap());
        let mut psi =
            SpinorWavefunction::gaussian(grid, (0.0, 0.0), (1.0, 1.0), (0.0, 0.0));
        assert!(PropagatorPlan::check_finite(&psi).is_ok());
        psi.up[[3, 3]] = Complex64::new(f64::NAN, 0.0);
        let err = PropagatorPlan::check_finite(&psi).unwrap_err();
        assert!(format!("{err}").contains("NaN"));
    }

    #[test]
    fn mismatched_pulse_c_is_rejected() {
        let grid = Arc::new(Grid2D::new(16, 16, 0.5, 0.5).unwrap());
        let pulse = LaserPulse::new(0.5, 0.5, 1.25, 5.0, C_AU, false).unwrap();
        let toggles = TermToggles {
            c_override: Some(10.0 * C_AU),
            ..Default::default()
        };
        assert!(
            PropagatorPlan::new(grid, None, Some(pulse), toggles, 1e-3, None).is_err()
        );
    }
}

/// Multiplies a (k_x, z) field by exp(i q a[z] s) with s the signed k_x bin
/// index. The factor is built by repeated multiplication per column so the
/// cost stays at one complex multiply per element.
fn apply_mixed_phase(field: &mut CField, a_vec: &[f64], q: f64) {
    let nx = field.nrows();
    let nz = field.ncols();
    let half = nx.div_ceil(2);
    let one = Complex64::new(1.0, 0.0);
    let w: Vec<Complex64> = a_vec
        .iter()
        .map(|&a| Complex64::from_polar(1.0, q * a))
        .collect();
    let mut cur = vec![one; nz];
    for ix in 0..half {
        let mut row = field.row_mut(ix);
        let row = row.as_slice_mut().expect("rows are contiguous");
        for (j, v) in row.iter_mut().enumerate() {
            *v *= cur[j];
            cur[j] *= w[j];
        }
    }
    for (c, wv) in cur.iter_mut().zip(w.iter()) {
        *c = wv.conj();
    }
    for ix in (half..nx).rev() {
        let mut row = field.row_mut(ix);
        let row = row.as_slice_mut().expect("rows are contiguous");
        for (j, v) in row.iter_mut().enumerate() {
            *v *= cur[j];
            cur[j] *= w[j].conj();
        }
    }
}
