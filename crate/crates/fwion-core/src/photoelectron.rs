//! Photoelectron (ATI) spectra from accumulated boundary flux plus the
//! ionized part of the residual wavefunction.
//!
//! Absorbed flux snapshots are Fourier transformed along x and summed into a
//! single running accumulator carrying the phase exp(+i p_x^2 t_a / 2); the
//! common factor exp(-i p_x^2 t_f / 2) applied at finalization completes the
//! free propagation exp(-i p_x^2 (t_f - t_a)/2) of every entry. The in-box
//! residual is windowed with a sin^2 sliding ramp before transforming.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft::FftEngine;
use crate::grid::Grid2D;
use crate::spinor::{Representation, SpinorWavefunction};
use crate::units::HARTREE_EV;
use crate::{FwError, Result};

type CField = Array2<Complex64>;

/// Sliding window selecting the ionized part of the residual wavefunction:
/// zero inside |x| < x_inner, sin^2 ramp across [x_inner, x_inner + x_slide],
/// untouched beyond.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IonizationWindow {
    pub x_inner: f64,
    pub x_slide: f64,
}

impl IonizationWindow {
    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        if self.x_inner < 0.0 || self.x_slide < 0.0 {
            return Err(FwError::Config("ionization window bounds must be >= 0".into()));
        }
        if self.x_inner + self.x_slide >= grid.x_max() {
            return Err(FwError::Config(format!(
                "ionization window {} + {} exceeds the box half-width {}",
                self.x_inner,
                self.x_slide,
                grid.x_max()
            )));
        }
        Ok(())
    }

    fn factor(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax < self.x_inner {
            0.0
        } else if ax <= self.x_inner + self.x_slide {
            let s = (std::f64::consts::PI * (ax - self.x_inner) / (2.0 * self.x_slide)).sin();
            s * s
        } else {
            1.0
        }
    }
}

/// Applies the ionization window to each spin component.
pub fn slice_residual(psi: &SpinorWavefunction, window: IonizationWindow) -> Result<SpinorWavefunction> {
    assert_eq!(psi.rep, Representation::Position);
    window.validate(&psi.grid)?;
    let mut out = psi.clone();
    for (ix, &x) in psi.grid.xs.iter().enumerate() {
        let w = window.factor(x);
        for iz in 0..psi.grid.nz {
            out.up[[ix, iz]] *= w;
            out.down[[ix, iz]] *= w;
        }
    }
    Ok(out)
}

/// Running accumulator of absorbed flux in the (k_x, z) representation.
#[derive(Clone)]
pub struct FluxLedger {
    pub grid: Arc<Grid2D>,
    pub acc_up: CField,
    pub acc_down: CField,
    /// Probability removed by the absorber, by exact norm bookkeeping.
    pub removed_probability: f64,
    pub entries: usize,
}

impl FluxLedger {
    pub fn new(grid: Arc<Grid2D>) -> Self {
        let shape = (grid.nx, grid.nz);
        FluxLedger {
            grid,
            acc_up: Array2::default(shape),
            acc_down: Array2::default(shape),
            removed_probability: 0.0,
            entries: 0,
        }
    }

    /// Folds one flux snapshot (position representation, timestamped at the
    /// absorption time) into the accumulator. The flux buffer is consumed:
    /// it is transformed in place along x and phase-advanced by
    /// exp(+i k_x^2 t_a / 2).
    pub fn accumulate(&mut self, flux: &mut SpinorWavefunction, engine: &FftEngine, removed: f64) {
        debug_assert!(flux.grid.same_lattice(&self.grid));
        assert_eq!(flux.rep, Representation::Position);
        let t_a = flux.time;
        self.removed_probability += removed;
        self.entries += 1;
        // Empty flux contributes nothing (interior-supported states).
        let up_live = flux.up.iter().any(|c| c.re != 0.0 || c.im != 0.0);
        let down_live = flux.down.iter().any(|c| c.re != 0.0 || c.im != 0.0);
        if !up_live && !down_live {
            return;
        }
        for (acc, src, live) in [
            (&mut self.acc_up, &mut flux.up, up_live),
            (&mut self.acc_down, &mut flux.down, down_live),
        ] {
            if !live {
                continue;
            }
            engine.forward_x(src);
            for ((mut acc_row, src_row), &kx) in acc
                .outer_iter_mut()
                .zip(src.outer_iter())
                .zip(self.grid.kxs.iter())
            {
                let phase = Complex64::from_polar(1.0, 0.5 * kx * kx * t_a);
                for (a, &s) in acc_row.iter_mut().zip(src_row.iter()) {
                    *a += phase * s;
                }
            }
        }
        flux.rep = Representation::MomentumX;
    }

    /// Probability currently held by the accumulated amplitude.
    pub fn accumulator_norm(&self) -> f64 {
        let s: f64 = self
            .acc_up
            .iter()
            .chain(self.acc_down.iter())
            .map(|c| c.norm_sqr())
            .sum();
        s * self.grid.cell_area()
    }
}

/// Momentum-space wavefunction of the emitted electron, per spin component,
/// in the (k_x, z) representation at the final time.
pub struct MomentumSpectrum {
    pub grid: Arc<Grid2D>,
    pub up: CField,
    pub down: CField,
    pub t_final: f64,
}

impl MomentumSpectrum {
    /// Total probability carried by the spectrum.
    pub fn norm(&self) -> f64 {
        let s: f64 = self
            .up
            .iter()
            .chain(self.down.iter())
            .map(|c| c.norm_sqr())
            .sum();
        s * self.grid.cell_area()
    }

    /// Marginal momentum distribution: bin probability over k_x after
    /// integrating |Psi_p|^2 over z and summing spins.
    pub fn marginal_kx(&self) -> Vec<f64> {
        let area = self.grid.cell_area();
        (0..self.grid.nx)
            .map(|ix| {
                let mut s = 0.0;
                for iz in 0..self.grid.nz {
                    s += self.up[[ix, iz]].norm_sqr() + self.down[[ix, iz]].norm_sqr();
                }
                s * area
            })
            .collect()
    }
}

/// Combines the windowed residual and the phase-completed ledger into the
/// final momentum wavefunction, per spin component.
pub fn momentum_spectrum(
    ledger: &FluxLedger,
    psi_out: Option<&SpinorWavefunction>,
    t_final: f64,
    engine: &FftEngine,
) -> MomentumSpectrum {
    let grid = ledger.grid.clone();
    let shape = (grid.nx, grid.nz);
    let mut up: CField = Array2::default(shape);
    let mut down: CField = Array2::default(shape);
    if let Some(psi) = psi_out {
        assert_eq!(psi.rep, Representation::Position);
        up.assign(&psi.up);
        down.assign(&psi.down);
        engine.forward_x(&mut up);
        engine.forward_x(&mut down);
    }
    for (dst, acc) in [(&mut up, &ledger.acc_up), (&mut down, &ledger.acc_down)] {
        for ((mut dst_row, acc_row), &kx) in dst
            .outer_iter_mut()
            .zip(acc.outer_iter())
            .zip(grid.kxs.iter())
        {
            let phase = Complex64::from_polar(1.0, -0.5 * kx * kx * t_final);
            for (d, &a) in dst_row.iter_mut().zip(acc_row.iter()) {
                *d += phase * a;
            }
        }
    }
    MomentumSpectrum {
        grid,
        up,
        down,
        t_final,
    }
}

/// Kinetic-energy spectrum with the weakly relativistic energy map
/// eps = p^2/2 - p^4/8c^2 and Jacobian prefactor (1 + eps/c^2)/sqrt(2 eps).
/// The p_x = 0 bin is excluded (Jacobian divergence); positive and negative
/// momenta are reported separately and combined.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergySpectrum {
    pub eps_au: Vec<f64>,
    pub eps_ev: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
    pub combined: Vec<f64>,
    /// |p_x| lattice matching the energy rows.
    pub momentum: Vec<f64>,
    pub total_probability: f64,
}

pub fn energy_spectrum(ms: &MomentumSpectrum, c: f64) -> EnergySpectrum {
    let grid = &ms.grid;
    let marginal = ms.marginal_kx();
    let dk = grid.dkx();
    let half = (grid.nx - 1) / 2; // largest strictly positive bin index
    let mut eps_au = Vec::with_capacity(half);
    let mut eps_ev = Vec::with_capacity(half);
    let mut momentum = Vec::with_capacity(half);
    let mut positive = Vec::with_capacity(half);
    let mut negative = Vec::with_capacity(half);
    let mut combined = Vec::with_capacity(half);
    for j in 1..=half {
        let p = grid.kxs[j];
        let eps = 0.5 * p * p - p.powi(4) / (8.0 * c * c);
        if eps <= 0.0 {
            continue;
        }
        let jac = (1.0 + eps / (c * c)) / (2.0 * eps).sqrt();
        // density in p is bin probability / dk; multiply by |dp/deps|.
        let pos = marginal[j] / dk * jac;
        let neg = marginal[grid.nx - j] / dk * jac;
        eps_au.push(eps);
        eps_ev.push(eps * HARTREE_EV);
        momentum.push(p);
        positive.push(pos);
        negative.push(neg);
        combined.push(pos + neg);
    }
    EnergySpectrum {
        eps_au,
        eps_ev,
        positive,
        negative,
        combined,
        momentum,
        total_probability: marginal.iter().sum(),
    }
}

impl EnergySpectrum {
    /// Local energy bin width at row j, deps = p dk to leading order.
    pub fn bin_width(&self, j: usize, dk: f64) -> f64 {
        self.momentum[j] * dk
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::C_AU;
    use approx::assert_relative_eq;

    fn grid() -> Arc<Grid2D> {
        Arc::new(Grid2D::new(128, 32, 0.4, 0.5).unwrap())
    }

    #[test]
    fn empty_flux_leaves_ledger_unchanged() {
        let g = grid();
        let engine = FftEngine::new(&g);
        let mut ledger = FluxLedger::new(g.clone());
        let mut flux = SpinorWavefunction::zeros(g.clone());
        flux.time = 3.0;
        ledger.accumulate(&mut flux, &engine, 0.0);
        assert_eq!(ledger.accumulator_norm(), 0.0);
        assert_eq!(ledger.removed_probability, 0.0);
        assert_eq!(ledger.entries, 1);
    }

    #[test]
    fn two_identical_packets_carry_relative_free_phase() {
        let g = grid();
        let engine = FftEngine::new(&g);
        let packet = SpinorWavefunction::gaussian(g.clone(), (8.0, 0.0), (1.5, 2.0), (1.2, 0.0));

        let (t1, t2) = (2.0, 5.0);
        let mut l1 = FluxLedger::new(g.clone());
        let mut f = packet.clone();
        f.time = t1;
        l1.accumulate(&mut f, &engine, 0.0);
        let mut l2 = FluxLedger::new(g.clone());
        let mut f = packet.clone();
        f.time = t2;
        l2.accumulate(&mut f, &engine, 0.0);

        // Entry phases differ by exp(i kx^2 (t1 - t2)/2) per momentum row.
        for (ix, &kx) in g.kxs.iter().enumerate() {
            let expected = Complex64::from_polar(1.0, 0.5 * kx * kx * (t1 - t2));
            for iz in 0..g.nz {
                let a = l1.acc_up[[ix, iz]];
                let b = l2.acc_up[[ix, iz]];
                if b.norm() > 1e-12 {
                    let ratio = a / b;
                    assert_relative_eq!(ratio.re, expected.re, epsilon = 1e-9);
                    assert_relative_eq!(ratio.im, expected.im, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn slice_residual_branches() {
        let g = grid();
        let w = IonizationWindow {
            x_inner: 5.0,
            x_slide: 10.0,
        };
        // Packet well inside the bound region vanishes (compact support on
        // the grid scale).
        let inner = SpinorWavefunction::gaussian(g.clone(), (0.0, 0.0), (0.5, 1.0), (0.0, 0.0));
        let out = slice_residual(&inner, w).unwrap();
        assert!(out.norm() < 1e-12);

        // Packet entirely beyond the ramp is untouched.
        let outer = SpinorWavefunction::gaussian(g.clone(), (20.0, 0.0), (1.0, 1.0), (0.0, 0.0));
        let out = slice_residual(&outer, w).unwrap();
        assert_relative_eq!(out.norm(), outer.norm(), max_relative = 1e-6);

        // Midpoint of the ramp multiplies the amplitude by sin^2(pi/4) = 1/2.
        let x_mid = w.x_inner + 0.5 * w.x_slide;
        assert_relative_eq!(w.factor(x_mid), 0.5, epsilon = 1e-12);
        assert_relative_eq!(w.factor(-x_mid), 0.5, epsilon = 1e-12);

        // Window wider than the box is rejected.
        let too_wide = IonizationWindow {
            x_inner: 20.0,
            x_slide: 10.0,
        };
        assert!(slice_residual(&inner, too_wide).is_err());
    }

    #[test]
    fn parseval_bookkeeping_with_disjoint_supports() {
        // One flux entry at t_f plus a residual with disjoint support: the
        // spectrum norm must split exactly into the two probabilities.
        let g = grid();
        let engine = FftEngine::new(&g);
        let t_f = 4.0;

        let mut ledger = FluxLedger::new(g.clone());
        let mut flux =
            SpinorWavefunction::gaussian(g.clone(), (18.0, 0.0), (1.2, 2.0), (0.8, 0.0));
        // Scale to probability 0.3.
        let s = Complex64::from(0.3_f64.sqrt());
        flux.up.mapv_inplace(|v| v * s);
        flux.time = t_f;
        ledger.accumulate(&mut flux, &engine, 0.3);

        let mut residual =
            SpinorWavefunction::gaussian(g.clone(), (-14.0, 0.0), (1.2, 2.0), (-0.5, 0.0));
        let s = Complex64::from(0.5_f64.sqrt());
        residual.up.mapv_inplace(|v| v * s);

        let ms = momentum_spectrum(&ledger, Some(&residual), t_f, &engine);
        assert_relative_eq!(ms.norm(), 0.8, max_relative = 1e-6);
        assert_relative_eq!(
            ms.norm(),
            residual.norm() + ledger.accumulator_norm(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn monochromatic_packet_maps_to_single_energy() {
        let g = grid();
        let engine = FftEngine::new(&g);
        let p0 = g.kxs[10];
        // Narrow in momentum: wide in position.
        let psi = SpinorWavefunction::gaussian(g.clone(), (0.0, 0.0), (8.0, 3.0), (p0, 0.0));
        let ledger = FluxLedger::new(g.clone());
        let ms = momentum_spectrum(&ledger, Some(&psi), 0.0, &engine);
        let marg = ms.marginal_kx();
        let (imax, _) = marg
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert_eq!(imax, 10);

        let es = energy_spectrum(&ms, C_AU);
        let (jmax, _) = es
            .combined
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let expected = 0.5 * p0 * p0 - p0.powi(4) / (8.0 * C_AU * C_AU);
        assert_relative_eq!(es.eps_au[jmax], expected, max_relative = 1e-9);
        // First reported bin starts at dk, not at p = 0.
        assert!(es.momentum[0] > 0.0);
    }

    #[test]
    fn nonrelativistic_limit_of_energy_map() {
        let g = grid();
        let engine = FftEngine::new(&g);
        let psi = SpinorWavefunction::gaussian(g.clone(), (0.0, 0.0), (4.0, 3.0), (1.0, 0.0));
        let ledger = FluxLedger::new(g.clone());
        let ms = momentum_spectrum(&ledger, Some(&psi), 0.0, &engine);
        let es = energy_spectrum(&ms, 1e9);
        for (j, &p) in es.momentum.iter().enumerate() {
            assert_relative_eq!(es.eps_au[j], 0.5 * p * p, max_relative = 1e-9);
        }
    }

    #[test]
    fn spin_components_add_at_probability_level() {
        let g = grid();
        let engine = FftEngine::new(&g);
        let base = SpinorWavefunction::gaussian(g.clone(), (6.0, 0.0), (2.0, 2.0), (0.7, 0.0));
        let half = Complex64::from(0.5_f64.sqrt());
        let mixed = SpinorWavefunction::from_scalar(g.clone(), base.up.clone(), (half, half));
        let ledger = FluxLedger::new(g.clone());
        let ms = momentum_spectrum(&ledger, Some(&mixed), 0.0, &engine);
        let es_mixed = energy_spectrum(&ms, C_AU);

        let ms_up = momentum_spectrum(&ledger, Some(&base), 0.0, &engine);
        let es_up = energy_spectrum(&ms_up, C_AU);
        for (a, b) in es_mixed.combined.iter().zip(es_up.combined.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-12);
        }
    }
}
