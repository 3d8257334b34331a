//! Field-free eigenenergies and eigenstates of the soft-core ion.
//!
//! Two independent routes: the spectral method (Fourier transform of the
//! autocorrelation of a symmetry-free test packet) and imaginary-time
//! relaxation with Gram-Schmidt deflation. The field-free problem is
//! spin-diagonal, so everything here works on scalar (spin-up) fields.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::fft::FftEngine;
use crate::grid::Grid2D;
use crate::observables::peaks;
use crate::potential::SoftCorePotential;
use crate::{FwError, Result};

type CField = Array2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParityLabel {
    /// Even in both directions and non-degenerate: s-like.
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenLevel {
    pub index: usize,
    pub energy: f64,
    /// Energy resolution of the method that produced this level.
    pub linewidth: f64,
    pub label: ParityLabel,
}

/// Levels plus (optionally) the states themselves, spin-up scalar fields.
#[derive(Clone)]
pub struct EigenResult {
    pub levels: Vec<EigenLevel>,
    pub states: Vec<CField>,
    pub grid: Arc<Grid2D>,
}

impl EigenResult {
    pub fn ground_energy(&self) -> f64 {
        self.levels.first().map(|l| l.energy).unwrap_or(f64::NAN)
    }
}

/// Parameters of the spectral scan. The probe packet is config-visible: the
/// resolved energies must not depend on it, only the peak heights do.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralScanConfig {
    pub total_time: f64,
    pub dt: f64,
    pub probe_center: (f64, f64),
    pub probe_sigma: (f64, f64),
    pub max_levels: usize,
    /// Keep peaks above this fraction of the strongest peak.
    pub peak_threshold: f64,
    /// Zero-padding factor for the autocorrelation transform.
    pub pad_factor: usize,
}

impl SpectralScanConfig {
    /// Defaults scaled from the harmonic frequency of the well bottom: the
    /// window spans ~40 ground-period oscillations, the probe sits off-center
    /// and off-axis so that no symmetry is imposed on the spectrum.
    pub fn for_softcore(p: &SoftCorePotential) -> Self {
        let r = p.ground_radius_estimate();
        let omega_h = p.harmonic_frequency();
        let total_time = (40.0 * 2.0 * std::f64::consts::PI / omega_h).clamp(25.0, 120.0);
        let v0 = p.value(0.0, 0.0).abs();
        let dt = (0.1 / v0).clamp(5e-4, 5e-3);
        SpectralScanConfig {
            total_time,
            dt,
            probe_center: (1.5 * r, 0.9 * r),
            probe_sigma: (1.3 * r, 1.3 * r),
            max_levels: 8,
            peak_threshold: 3e-5,
            pad_factor: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub dtau: f64,
    /// Relative energy change per step below which a state counts as converged.
    pub tol_rel: f64,
    pub max_steps: usize,
    pub check_every: usize,
    /// Width of the polynomial-seeded Gaussians used as starting states.
    pub seed_sigma: f64,
}

impl RelaxConfig {
    pub fn for_softcore(p: &SoftCorePotential) -> Self {
        let v0 = p.value(0.0, 0.0).abs();
        RelaxConfig {
            dtau: (0.25 / v0).clamp(1e-4, 0.05),
            tol_rel: 1e-10,
            max_steps: 400_000,
            check_every: 20,
            seed_sigma: 1.5 * p.ground_radius_estimate(),
        }
    }
}

// ---------------------------------------------------------------------------
// scalar field helpers

pub(crate) fn scalar_norm(f: &CField, grid: &Grid2D) -> f64 {
    f.iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.cell_area()
}

pub(crate) fn scalar_inner(a: &CField, b: &CField, grid: &Grid2D) -> Complex64 {
    let mut acc = Complex64::default();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc * grid.cell_area()
}

fn scalar_normalize(f: &mut CField, grid: &Grid2D) {
    let n = scalar_norm(f, grid);
    if n > 0.0 {
        let s = Complex64::from(1.0 / n.sqrt());
        f.mapv_inplace(|v| v * s);
    }
}

pub(crate) fn gaussian_scalar(grid: &Grid2D, center: (f64, f64), sigma: (f64, f64)) -> CField {
    let mut f = Array2::from_shape_fn((grid.nx, grid.nz), |(i, j)| {
        let x = grid.xs[i] - center.0;
        let z = grid.zs[j] - center.1;
        Complex64::from(
            (-x * x / (4.0 * sigma.0 * sigma.0) - z * z / (4.0 * sigma.1 * sigma.1)).exp(),
        )
    });
    scalar_normalize(&mut f, grid);
    f
}

fn scalar_parity(f: &CField, grid: &Grid2D) -> (f64, f64) {
    let (nx, nz) = (grid.nx, grid.nz);
    let mut px = Complex64::default();
    let mut pz = Complex64::default();
    let mut nsq = 0.0;
    for ix in 1..nx {
        for iz in 1..nz {
            let v = f[[ix, iz]];
            nsq += v.norm_sqr();
            px += v.conj() * f[[nx - ix, iz]];
            pz += v.conj() * f[[ix, nz - iz]];
        }
    }
    if nsq == 0.0 {
        (0.0, 0.0)
    } else {
        (px.re / nsq, pz.re / nsq)
    }
}

/// H psi for the field-free scalar problem, H = p^2/2 + V.
pub(crate) fn apply_h0(f: &CField, v: &Array2<f64>, grid: &Grid2D, engine: &FftEngine) -> CField {
    let mut kin = f.clone();
    engine.forward_2d(&mut kin);
    for (ix, &kx) in grid.kxs.iter().enumerate() {
        for (iz, &kz) in grid.kzs.iter().enumerate() {
            kin[[ix, iz]] *= 0.5 * (kx * kx + kz * kz);
        }
    }
    engine.inverse_2d(&mut kin);
    for ((out, &pot), src) in kin.iter_mut().zip(v.iter()).zip(f.iter()) {
        *out += pot * src;
    }
    kin
}

/// Strang step exp(-i dt V/2) exp(-i dt T) exp(-i dt V/2) for a scalar field.
struct ScalarStepper {
    engine: FftEngine,
    pos_half: CField,
    kin_full: CField,
}

impl ScalarStepper {
    fn new(grid: &Grid2D, v: &Array2<f64>, dt: f64) -> Self {
        let pos_half = v.mapv(|p| Complex64::from_polar(1.0, -0.5 * dt * p));
        let mut kin_full = Array2::default((grid.nx, grid.nz));
        for (ix, &kx) in grid.kxs.iter().enumerate() {
            for (iz, &kz) in grid.kzs.iter().enumerate() {
                kin_full[[ix, iz]] =
                    Complex64::from_polar(1.0, -0.5 * dt * (kx * kx + kz * kz));
            }
        }
        ScalarStepper {
            engine: FftEngine::new(grid),
            pos_half,
            kin_full,
        }
    }

    fn step(&self, f: &mut CField) {
        ndarray::Zip::from(&mut *f)
            .and(&self.pos_half)
            .for_each(|a, &b| *a *= b);
        self.engine.forward_2d(f);
        ndarray::Zip::from(&mut *f)
            .and(&self.kin_full)
            .for_each(|a, &b| *a *= b);
        self.engine.inverse_2d(f);
        ndarray::Zip::from(&mut *f)
            .and(&self.pos_half)
            .for_each(|a, &b| *a *= b);
    }
}

// ---------------------------------------------------------------------------
// spectral method

/// Eigenenergies from the windowed autocorrelation of a propagated test
/// packet. Returns levels sorted by energy, resolution 2 pi / total_time.
pub fn spectral_scan(
    v: &Array2<f64>,
    grid: &Arc<Grid2D>,
    cfg: &SpectralScanConfig,
) -> Result<Vec<EigenLevel>> {
    let autocorr = autocorrelation_series(v, grid, cfg);
    let linewidth = 2.0 * std::f64::consts::PI / cfg.total_time;
    let energies = autocorrelation_peaks(&autocorr, cfg)?;
    Ok(energies
        .into_iter()
        .take(cfg.max_levels)
        .enumerate()
        .map(|(index, energy)| EigenLevel {
            index,
            energy,
            linewidth,
            // Parity is assigned by projection; the scan alone only sees
            // energies.
            label: ParityLabel::Asymmetric,
        })
        .collect())
}

fn autocorrelation_series(
    v: &Array2<f64>,
    grid: &Arc<Grid2D>,
    cfg: &SpectralScanConfig,
) -> Vec<Complex64> {
    let probe = gaussian_scalar(grid, cfg.probe_center, cfg.probe_sigma);
    let stepper = ScalarStepper::new(grid, v, cfg.dt);
    let n_steps = (cfg.total_time / cfg.dt).round() as usize;
    let mut psi = probe.clone();
    let mut series = Vec::with_capacity(n_steps + 1);
    series.push(scalar_inner(&probe, &psi, grid));
    for _ in 0..n_steps {
        stepper.step(&mut psi);
        series.push(scalar_inner(&probe, &psi, grid));
    }
    series
}

/// Peak energies of |FFT(hann * c(t))|^2, refined by quadratic interpolation
/// of the log power. c(t) = sum |a_n|^2 exp(-i E_n t), so a bound level E < 0
/// appears at positive transform frequency.
fn autocorrelation_peaks(series: &[Complex64], cfg: &SpectralScanConfig) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 16 {
        return Err(FwError::Config(
            "autocorrelation series too short for a spectral scan".into(),
        ));
    }
    let n_pad = (n * cfg.pad_factor.max(1)).next_power_of_two();
    let mut buf = vec![Complex64::default(); n_pad];
    for (i, &c) in series.iter().enumerate() {
        let w = 0.5
            * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos());
        buf[i] = c * w;
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(n_pad, FftDirection::Forward);
    fft.process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();

    // Greedy strongest-first selection with a minimum separation of six
    // analysis bins, which rejects the Hann window sidelobes of stronger
    // lines (below -55 dB beyond that distance).
    let mut maxima = peaks::local_maxima(&power, cfg.peak_threshold);
    maxima.sort_by(|&a, &b| power[b].partial_cmp(&power[a]).unwrap());
    let min_sep = 6 * n_pad / n;
    let mut kept: Vec<usize> = Vec::new();
    for i in maxima {
        if kept
            .iter()
            .all(|&j| i.abs_diff(j) >= min_sep && n_pad - i.abs_diff(j) >= min_sep)
        {
            kept.push(i);
        }
    }
    let dt_eff = cfg.dt; // series sampled every propagation step
    let mut energies: Vec<f64> = kept
        .into_iter()
        .map(|i| {
            let frac = peaks::parabolic_refine_log(&power, i);
            let k = i as f64 + frac;
            let k_signed = if k > n_pad as f64 / 2.0 {
                k - n_pad as f64
            } else {
                k
            };
            -2.0 * std::f64::consts::PI * k_signed / (n_pad as f64 * dt_eff)
        })
        .collect();
    energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(energies)
}

/// A state extracted from the propagated trajectory by windowed phase-matched
/// accumulation at one scan energy.
pub struct ProjectedState {
    pub state: CField,
    pub energy_mean: f64,
    pub energy_variance: f64,
    /// Set when the energy variance exceeds the resolution, which marks a
    /// degenerate or near-degenerate level.
    pub degenerate_flag: bool,
}

/// Re-propagates the probe and accumulates Phi_n ~ sum_t w(t) e^{+i E_n t}
/// psi(t) for each requested energy. States inside a near-degenerate cluster
/// are orthogonalized in cluster order.
pub fn project_states(
    v: &Array2<f64>,
    grid: &Arc<Grid2D>,
    cfg: &SpectralScanConfig,
    energies: &[f64],
) -> Result<Vec<ProjectedState>> {
    let probe = gaussian_scalar(grid, cfg.probe_center, cfg.probe_sigma);
    let stepper = ScalarStepper::new(grid, v, cfg.dt);
    let n_steps = (cfg.total_time / cfg.dt).round() as usize;
    let shape = (grid.nx, grid.nz);
    let mut acc: Vec<CField> = energies.iter().map(|_| Array2::default(shape)).collect();
    let mut psi = probe.clone();
    for step in 0..=n_steps {
        if step > 0 {
            stepper.step(&mut psi);
        }
        let t = step as f64 * cfg.dt;
        let w = 0.5
            * (1.0
                - (2.0 * std::f64::consts::PI * step as f64 / (n_steps as f64)).cos());
        for (m, &e) in energies.iter().enumerate() {
            let phase = Complex64::from_polar(w * cfg.dt, e * t);
            ndarray::Zip::from(&mut acc[m]).and(&psi).for_each(|a, &p| {
                *a += phase * p;
            });
        }
    }

    // Orthogonalize within near-degenerate clusters (2 linewidths).
    let linewidth = 2.0 * std::f64::consts::PI / cfg.total_time;
    for m in 0..acc.len() {
        for j in 0..m {
            if (energies[m] - energies[j]).abs() < 2.0 * linewidth {
                let overlap = scalar_inner(&acc[j], &acc[m], grid);
                let (prev, cur) = acc.split_at_mut(m);
                ndarray::Zip::from(&mut cur[0]).and(&prev[j]).for_each(|a, &b| {
                    *a -= overlap * b;
                });
            }
        }
        scalar_normalize(&mut acc[m], grid);
    }

    let engine = FftEngine::new(grid);
    let out = acc
        .into_iter()
        .map(|state| {
            let h_psi = apply_h0(&state, v, grid, &engine);
            let mean = scalar_inner(&state, &h_psi, grid).re;
            let h2 = scalar_inner(&h_psi, &h_psi, grid).re;
            let var = (h2 - mean * mean).max(0.0);
            ProjectedState {
                state,
                energy_mean: mean,
                energy_variance: var,
                degenerate_flag: var.sqrt() > 2.0 * linewidth,
            }
        })
        .collect();
    Ok(out)
}

/// Single-state convenience wrapper around [`project_states`].
pub fn project_state(
    v: &Array2<f64>,
    grid: &Arc<Grid2D>,
    cfg: &SpectralScanConfig,
    energy: f64,
) -> Result<ProjectedState> {
    Ok(project_states(v, grid, cfg, &[energy])?.pop().expect("one state"))
}

// ---------------------------------------------------------------------------
// imaginary-time relaxation

/// Evolves polynomial-seeded Gaussians in imaginary time with sequential
/// Gram-Schmidt deflation. Returns states ordered by energy.
pub fn imaginary_time_relax(
    v: &Array2<f64>,
    grid: &Arc<Grid2D>,
    n_states: usize,
    cfg: &RelaxConfig,
) -> Result<EigenResult> {
    if n_states == 0 || n_states > 6 {
        return Err(FwError::Config(format!(
            "imaginary-time relaxation supports 1..=6 states, got {n_states}"
        )));
    }
    let engine = FftEngine::new(grid);
    let pos_half: Array2<f64> = v.mapv(|p| (-0.5 * cfg.dtau * p).exp());
    let mut kin_full = Array2::zeros((grid.nx, grid.nz));
    for (ix, &kx) in grid.kxs.iter().enumerate() {
        for (iz, &kz) in grid.kzs.iter().enumerate() {
            kin_full[[ix, iz]] = (-0.5 * cfg.dtau * (kx * kx + kz * kz)).exp();
        }
    }

    let s = cfg.seed_sigma;
    let seeds: Vec<Box<dyn Fn(f64, f64) -> f64>> = vec![
        Box::new(|_, _| 1.0),
        Box::new(|x, _| x),
        Box::new(|_, z| z),
        Box::new(move |x, z| x * z),
        Box::new(move |x, z| x * x - z * z),
        Box::new(move |x, z| x * x + z * z - 2.0 * s * s),
    ];

    let mut states: Vec<CField> = Vec::new();
    let mut energies: Vec<f64> = Vec::new();
    let mut widths: Vec<f64> = Vec::new();

    for m in 0..n_states {
        let mut psi = gaussian_scalar(grid, (0.0, 0.0), (s, s));
        for (ix, &x) in grid.xs.iter().enumerate() {
            for (iz, &z) in grid.zs.iter().enumerate() {
                psi[[ix, iz]] *= seeds[m](x, z);
            }
        }
        scalar_normalize(&mut psi, grid);

        let mut e_prev = f64::INFINITY;
        let mut converged = false;
        let mut last_change = f64::INFINITY;
        let mut steps_done = 0usize;
        while steps_done < cfg.max_steps {
            for _ in 0..cfg.check_every {
                // exp(-dtau V/2) exp(-dtau T) exp(-dtau V/2), then deflate.
                ndarray::Zip::from(&mut psi).and(&pos_half).for_each(|a, &b| {
                    *a *= b;
                });
                engine.forward_2d(&mut psi);
                ndarray::Zip::from(&mut psi).and(&kin_full).for_each(|a, &b| {
                    *a *= b;
                });
                engine.inverse_2d(&mut psi);
                ndarray::Zip::from(&mut psi).and(&pos_half).for_each(|a, &b| {
                    *a *= b;
                });
                for lower in &states {
                    let overlap = scalar_inner(lower, &psi, grid);
                    ndarray::Zip::from(&mut psi).and(lower).for_each(|a, &b| {
                        *a -= overlap * b;
                    });
                }
                scalar_normalize(&mut psi, grid);
            }
            steps_done += cfg.check_every;
            let h_psi = apply_h0(&psi, v, grid, &engine);
            let e = scalar_inner(&psi, &h_psi, grid).re;
            last_change = ((e - e_prev) / e.abs().max(1e-12)).abs() / cfg.check_every as f64;
            e_prev = e;
            if last_change < cfg.tol_rel {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(FwError::Numerical(format!(
                "imaginary-time relaxation of state {m} did not converge within {} steps \
                 (last relative change {last_change:.3e} per step)",
                cfg.max_steps
            )));
        }
        energies.push(e_prev);
        widths.push((last_change * e_prev.abs() * 10.0).max(1e-12));
        states.push(psi);
    }

    // Order by energy and label.
    let mut order: Vec<usize> = (0..n_states).collect();
    order.sort_by(|&a, &b| energies[a].partial_cmp(&energies[b]).unwrap());
    let states: Vec<CField> = order.iter().map(|&i| states[i].clone()).collect();
    let energies: Vec<f64> = order.iter().map(|&i| energies[i]).collect();
    let widths: Vec<f64> = order.iter().map(|&i| widths[i]).collect();

    let levels = label_levels(&states, &energies, &widths, grid);
    Ok(EigenResult {
        levels,
        states,
        grid: grid.clone(),
    })
}

fn label_levels(
    states: &[CField],
    energies: &[f64],
    widths: &[f64],
    grid: &Grid2D,
) -> Vec<EigenLevel> {
    let n = states.len();
    let clusters = cluster_by_energy(energies, widths);
    let mut labels = vec![ParityLabel::Asymmetric; n];
    for cluster in &clusters {
        if cluster.len() == 1 {
            let i = cluster[0];
            let (px, pz) = scalar_parity(&states[i], grid);
            if px > 0.5 && pz > 0.5 {
                labels[i] = ParityLabel::Symmetric;
            }
        }
    }
    (0..n)
        .map(|i| EigenLevel {
            index: i,
            energy: energies[i],
            linewidth: widths[i],
            label: labels[i],
        })
        .collect()
}

/// Groups level indices whose energies lie within two linewidths.
pub fn cluster_by_energy(energies: &[f64], widths: &[f64]) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..energies.len() {
        let tol = 2.0 * widths[i].max(1e-9 * energies[i].abs());
        match clusters.last_mut() {
            Some(cluster)
                if (energies[i] - energies[*cluster.last().unwrap()]).abs() < tol =>
            {
                cluster.push(i)
            }
            _ => clusters.push(vec![i]),
        }
    }
    clusters
}

// ---------------------------------------------------------------------------
// field-free spin-orbit splitting

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoSplitting {
    pub level_indices: Vec<usize>,
    pub delta_e: f64,
    pub delta_over_omega: f64,
    /// The splitting is below the energy resolution and is only a bound.
    pub resolution_limited: bool,
}

/// Diagonalizes sigma_y f(x,z) L_y within each near-degenerate multiplet.
/// A singlet state does not split; a pair splits by 2 |<a| f L_y |b>|.
pub fn field_free_so_splitting(
    result: &EigenResult,
    p: &SoftCorePotential,
    c: f64,
    omega_ref: f64,
) -> Vec<SoSplitting> {
    let grid = &result.grid;
    let engine = FftEngine::new(grid);
    let f = p.sample_so_prefactor(grid, c);
    let energies: Vec<f64> = result.levels.iter().map(|l| l.energy).collect();
    let widths: Vec<f64> = result.levels.iter().map(|l| l.linewidth).collect();
    let clusters = cluster_by_energy(&energies, &widths);

    let f_ly = |state: &CField| -> CField {
        let mut px = Array2::default((grid.nx, grid.nz));
        let mut pz = Array2::default((grid.nx, grid.nz));
        engine.apply_px(state, grid, &mut px);
        engine.apply_pz(state, grid, &mut pz);
        Array2::from_shape_fn((grid.nx, grid.nz), |(ix, iz)| {
            f[[ix, iz]] * (grid.zs[iz] * px[[ix, iz]] - grid.xs[ix] * pz[[ix, iz]])
        })
    };

    clusters
        .into_iter()
        .map(|cluster| {
            let resolution = cluster
                .iter()
                .map(|&i| widths[i])
                .fold(0.0_f64, f64::max);
            if cluster.len() < 2 {
                return SoSplitting {
                    level_indices: cluster,
                    delta_e: 0.0,
                    delta_over_omega: 0.0,
                    resolution_limited: true,
                };
            }
            // Coupling matrix S_ij = <i| f L_y |j> is i * (real antisymmetric)
            // for real states; its eigenvalue magnitudes give the splitting.
            let n = cluster.len();
            let mut a = vec![vec![0.0_f64; n]; n];
            for (ii, &i) in cluster.iter().enumerate() {
                let applied = f_ly(&result.states[i]);
                for (jj, &j) in cluster.iter().enumerate() {
                    if jj <= ii {
                        continue;
                    }
                    let s = scalar_inner(&result.states[j], &applied, grid);
                    a[jj][ii] = s.im;
                    a[ii][jj] = -s.im;
                }
            }
            let m = match n {
                2 => a[0][1].abs(),
                3 => (a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2)).sqrt(),
                // Larger multiplets do not occur for these potentials; fall
                // back to the strongest pairwise coupling.
                _ => a
                    .iter()
                    .flat_map(|row| row.iter().map(|v| v.abs()))
                    .fold(0.0_f64, f64::max),
            };
            let delta_e = 2.0 * m;
            SoSplitting {
                level_indices: cluster,
                delta_e,
                delta_over_omega: delta_e / omega_ref,
                resolution_limited: delta_e < resolution,
            }
        })
        .collect()
}
