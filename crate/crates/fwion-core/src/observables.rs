//! Time-series extraction, weakly relativistic accelerations, radiation
//! spectra and spectral-line analytics.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::fft::FftEngine;
use crate::grid::Grid2D;
use crate::spinor::SpinorWavefunction;
use crate::{FwError, Result};

/// Uniformly sampled scalar observable with a unit tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub name: String,
    pub unit: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeriesRecord {
    pub fn new(name: &str, unit: &str) -> Self {
        TimeSeriesRecord {
            name: name.to_string(),
            unit: unit.to_string(),
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        self.times.push(t);
        self.values.push(v);
    }

    /// Sample interval, assuming uniform cadence.
    pub fn cadence(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        self.times[1] - self.times[0]
    }
}

/// One-sided power spectrum with the frequency axis in units of a reference
/// laser frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumRecord {
    /// Which acceleration channel produced it ("x" or "z").
    pub polarization: String,
    pub omega_ref: f64,
    /// Window in time over which the transform was taken.
    pub window: (f64, f64),
    pub freq_omega: Vec<f64>,
    pub power: Vec<f64>,
}

impl SpectrumRecord {
    /// Frequency resolution in units of omega_ref (before interpolation).
    pub fn resolution(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.window.1 - self.window.0) / self.omega_ref
    }
}

// ---------------------------------------------------------------------------
// accelerations

/// Weakly relativistic acceleration expectation values.
///
/// `plain` is the Ehrenfest force <-grad V>; `corrected` additionally applies
/// (3/2c^2)(d_xx + d_zz) to the product of force and wavefunction (operator
/// acting rightward), keeping terms to O(1/c^2).
#[derive(Debug, Clone, Copy, Default)]
pub struct Acceleration {
    pub plain_x: f64,
    pub plain_z: f64,
    pub corrected_x: f64,
    pub corrected_z: f64,
}

/// Alternative reading of the correction: the Laplacian acts on the force as
/// a local function instead of on the product field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaplacianMode {
    OnProduct,
    OnForce,
}

pub struct AccelerationTables {
    pub force_x: Array2<f64>,
    pub force_z: Array2<f64>,
    /// lap(force) tables, only used in OnForce mode.
    lap_fx: Array2<f64>,
    lap_fz: Array2<f64>,
}

impl AccelerationTables {
    pub fn new(force_x: Array2<f64>, force_z: Array2<f64>, grid: &Grid2D, engine: &FftEngine) -> Self {
        let lap = |f: &Array2<f64>| {
            let mut c: Array2<Complex64> = f.mapv(Complex64::from);
            engine.apply_laplacian(&mut c, grid);
            c.mapv(|v| v.re)
        };
        let lap_fx = lap(&force_x);
        let lap_fz = lap(&force_z);
        AccelerationTables {
            force_x,
            force_z,
            lap_fx,
            lap_fz,
        }
    }
}

/// Acceleration along both axes; the imaginary residue of the product-form
/// operator is discarded (it is O(1/c^2) times force gradients).
pub fn acceleration(
    psi: &SpinorWavefunction,
    tables: &AccelerationTables,
    engine: &FftEngine,
    c: f64,
    mode: LaplacianMode,
) -> Acceleration {
    let grid = &psi.grid;
    let area = grid.cell_area();
    let pref = 1.5 / (c * c);
    let mut out = Acceleration::default();
    match mode {
        LaplacianMode::OnProduct => {
            for comp in [&psi.up, &psi.down] {
                if comp.iter().all(|v| v.norm_sqr() == 0.0) {
                    continue;
                }
                for (force, plain, corrected) in [
                    (&tables.force_x, &mut out.plain_x, &mut out.corrected_x),
                    (&tables.force_z, &mut out.plain_z, &mut out.corrected_z),
                ] {
                    let mut product: Array2<Complex64> =
                        Array2::default((grid.nx, grid.nz));
                    ndarray::Zip::from(&mut product)
                        .and(comp)
                        .and(force)
                        .for_each(|p, &c, &f| *p = f * c);
                    let mut direct = Complex64::default();
                    ndarray::Zip::from(comp).and(&product).for_each(|a, b| {
                        direct += a.conj() * b;
                    });
                    engine.apply_laplacian(&mut product, grid);
                    let mut lap_term = Complex64::default();
                    ndarray::Zip::from(comp).and(&product).for_each(|a, b| {
                        lap_term += a.conj() * b;
                    });
                    *plain += direct.re * area;
                    *corrected += (direct.re + pref * lap_term.re) * area;
                }
            }
        }
        LaplacianMode::OnForce => {
            for comp in [&psi.up, &psi.down] {
                for (force, lap, plain, corrected) in [
                    (
                        &tables.force_x,
                        &tables.lap_fx,
                        &mut out.plain_x,
                        &mut out.corrected_x,
                    ),
                    (
                        &tables.force_z,
                        &tables.lap_fz,
                        &mut out.plain_z,
                        &mut out.corrected_z,
                    ),
                ] {
                    let mut direct = 0.0;
                    let mut corr = 0.0;
                    ndarray::Zip::from(comp).and(force).and(lap).for_each(
                        |a, &f, &l| {
                            let dens = a.norm_sqr();
                            direct += f * dens;
                            corr += (f + pref * l) * dens;
                        },
                    );
                    *plain += direct * area;
                    *corrected += corr * area;
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// spectra

/// |FFT(hann * a(t))|^2 over a window of a uniformly sampled series, with the
/// frequency axis in units of omega_ref. The window defaults to the plateau
/// in the callers; the mean is removed before windowing.
pub fn radiation_spectrum(
    series: &TimeSeriesRecord,
    window: (f64, f64),
    omega_ref: f64,
    polarization: &str,
) -> Result<SpectrumRecord> {
    let (t0, t1) = window;
    if series.times.is_empty() {
        return Err(FwError::Config("empty time series".into()));
    }
    let t_first = series.times[0];
    let t_last = *series.times.last().unwrap();
    if t0 < t_first - 1e-9 || t1 > t_last + 1e-9 || t1 <= t0 {
        return Err(FwError::Config(format!(
            "spectrum window [{t0}, {t1}] outside recorded span [{t_first}, {t_last}]"
        )));
    }
    let idx: Vec<usize> = series
        .times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= t0 - 1e-12 && t <= t1 + 1e-12)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 16 {
        return Err(FwError::Config("spectrum window holds too few samples".into()));
    }
    let n = idx.len();
    let dt = series.times[idx[1]] - series.times[idx[0]];
    let mean = idx.iter().map(|&i| series.values[i]).sum::<f64>() / n as f64;
    let n_pad = (4 * n).next_power_of_two();
    let mut buf = vec![Complex64::default(); n_pad];
    for (j, &i) in idx.iter().enumerate() {
        let w = 0.5
            * (1.0 - (2.0 * std::f64::consts::PI * j as f64 / (n as f64 - 1.0)).cos());
        buf[j] = Complex64::from((series.values[i] - mean) * w);
    }
    let mut planner = FftPlanner::new();
    planner
        .plan_fft(n_pad, FftDirection::Forward)
        .process(&mut buf);

    let t_span = (n - 1) as f64 * dt;
    let dw = 2.0 * std::f64::consts::PI / (n_pad as f64 * dt);
    let half = n_pad / 2;
    let freq_omega = (0..half).map(|k| k as f64 * dw / omega_ref).collect();
    let power = buf[..half].iter().map(|c| c.norm_sqr()).collect();
    Ok(SpectrumRecord {
        polarization: polarization.to_string(),
        omega_ref,
        window: (t0, t0 + t_span),
        freq_omega,
        power,
    })
}

/// Result of locating one dominant peak in each of two spectra.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LineShift {
    pub position_a: f64,
    pub position_b: f64,
    /// position_a - position_b, in units of omega_ref.
    pub delta: f64,
}

/// Locates the dominant peak of each spectrum inside `band` (in omega units)
/// by quadratic interpolation of the log power and returns the shift A - B.
pub fn line_shift(
    spec_a: &SpectrumRecord,
    spec_b: &SpectrumRecord,
    band: (f64, f64),
) -> Result<LineShift> {
    let pa = dominant_peak(spec_a, band)?;
    let pb = dominant_peak(spec_b, band)?;
    Ok(LineShift {
        position_a: pa,
        position_b: pb,
        delta: pa - pb,
    })
}

/// Position (in omega units) of the single dominant peak in the band.
pub fn dominant_peak(spec: &SpectrumRecord, band: (f64, f64)) -> Result<f64> {
    let lo = spec
        .freq_omega
        .iter()
        .position(|&f| f >= band.0)
        .ok_or_else(|| FwError::Config("band outside spectrum".into()))?;
    let hi = spec
        .freq_omega
        .iter()
        .rposition(|&f| f <= band.1)
        .ok_or_else(|| FwError::Config("band outside spectrum".into()))?;
    if hi <= lo + 2 {
        return Err(FwError::Config("band too narrow".into()));
    }
    let slice = &spec.power[lo..=hi];
    let (arg, &max) = slice
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if max <= 0.0 {
        return Err(FwError::Numerical("no power in the requested band".into()));
    }
    // Reject ties: a second, separated bin at essentially the same height
    // means there is no single dominant line.
    let ties = slice
        .iter()
        .enumerate()
        .filter(|(i, &p)| p > 0.999_999 * max && (*i as isize - arg as isize).abs() > 2)
        .count();
    if ties > 0 {
        return Err(FwError::Numerical(
            "multiple equally strong peaks in the band".into(),
        ));
    }
    if arg == 0 || arg == slice.len() - 1 {
        return Err(FwError::Numerical(
            "peak sits at the band edge; widen the band".into(),
        ));
    }
    let i = lo + arg;
    let frac = peaks::parabolic_refine_log(&spec.power, i);
    let df = spec.freq_omega[1] - spec.freq_omega[0];
    Ok(spec.freq_omega[i] + frac * df)
}

/// Peaks of a spectrum inside a band: positions (omega units) and the
/// spacings between adjacent peaks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultipletStructure {
    pub positions: Vec<f64>,
    pub splittings: Vec<f64>,
}

/// Finds all peaks above `rel_threshold` times the band maximum.
pub fn splitting_analysis(
    spec: &SpectrumRecord,
    band: (f64, f64),
    rel_threshold: f64,
) -> Result<MultipletStructure> {
    let lo = spec
        .freq_omega
        .iter()
        .position(|&f| f >= band.0)
        .ok_or_else(|| FwError::Config("band outside spectrum".into()))?;
    let hi = spec
        .freq_omega
        .iter()
        .rposition(|&f| f <= band.1)
        .ok_or_else(|| FwError::Config("band outside spectrum".into()))?;
    if hi <= lo + 4 {
        return Err(FwError::Config("band too narrow".into()));
    }
    let slice = &spec.power[lo..=hi];
    let maxima = peaks::local_maxima(slice, rel_threshold);
    let df = spec.freq_omega[1] - spec.freq_omega[0];
    let positions: Vec<f64> = maxima
        .into_iter()
        .filter(|&i| i > 0 && i < slice.len() - 1)
        .map(|i| {
            let frac = peaks::parabolic_refine_log(slice, i);
            spec.freq_omega[lo + i] + frac * df
        })
        .collect();
    let splittings = positions.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(MultipletStructure {
        positions,
        splittings,
    })
}

/// Dominant frequency of a series (in units of omega_ref) over a window;
/// used for the spin-flip 2 omega check.
pub fn dominant_frequency(
    series: &TimeSeriesRecord,
    window: (f64, f64),
    omega_ref: f64,
) -> Result<f64> {
    let spec = radiation_spectrum(series, window, omega_ref, "series")?;
    // Skip the immediate DC neighborhood that the mean removal leaves behind.
    let lo = spec.resolution() * 2.0;
    let hi = *spec.freq_omega.last().unwrap();
    dominant_peak(&spec, (lo, hi))
}

// ---------------------------------------------------------------------------
// peak utilities

pub(crate) mod peaks {
    /// Indices of strict local maxima above rel_threshold * global max.
    pub fn local_maxima(values: &[f64], rel_threshold: f64) -> Vec<usize> {
        let max = values.iter().cloned().fold(0.0_f64, f64::max);
        let floor = rel_threshold * max;
        let mut out = Vec::new();
        for i in 1..values.len().saturating_sub(1) {
            if values[i] > floor && values[i] > values[i - 1] && values[i] >= values[i + 1] {
                out.push(i);
            }
        }
        out
    }

    /// Sub-bin refinement of a peak at index i from the log-power parabola
    /// through (i-1, i, i+1). Returns the fractional offset in [-0.5, 0.5].
    pub fn parabolic_refine_log(values: &[f64], i: usize) -> f64 {
        if i == 0 || i + 1 >= values.len() {
            return 0.0;
        }
        let eps = f64::MIN_POSITIVE;
        let la = (values[i - 1].max(eps)).ln();
        let lb = (values[i].max(eps)).ln();
        let lc = (values[i + 1].max(eps)).ln();
        let denom = la - 2.0 * lb + lc;
        if denom.abs() < 1e-300 {
            return 0.0;
        }
        (0.5 * (la - lc) / denom).clamp(-0.5, 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cosine_series(freqs: &[(f64, f64)], dt: f64, n: usize) -> TimeSeriesRecord {
        let mut s = TimeSeriesRecord::new("a", "au");
        for i in 0..n {
            let t = i as f64 * dt;
            let v = freqs.iter().map(|&(w, amp)| amp * (w * t).cos()).sum();
            s.push(t, v);
        }
        s
    }

    #[test]
    fn single_cosine_gives_single_dominant_peak() {
        let omega = 0.2;
        let big_omega = 7.0 * omega;
        let s = cosine_series(&[(big_omega, 1.0)], 0.05, 8000);
        let spec = radiation_spectrum(&s, (0.0, 399.0), omega, "x").unwrap();
        let peak = dominant_peak(&spec, (3.0, 12.0)).unwrap();
        assert_relative_eq!(peak, 7.0, max_relative = 1e-3);
        // Dominance: integrated power away from the peak is far below it.
        let peak_power = spec
            .power
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);
        let off: f64 = spec
            .freq_omega
            .iter()
            .zip(spec.power.iter())
            .filter(|(f, _)| (**f - 7.0).abs() > 0.5)
            .map(|(_, p)| *p)
            .fold(0.0_f64, f64::max);
        assert!(off < 1e-4 * peak_power, "sidelobe ratio {}", off / peak_power);
    }

    #[test]
    fn identical_spectra_have_zero_shift() {
        let s = cosine_series(&[(1.4, 1.0)], 0.05, 4000);
        let spec = radiation_spectrum(&s, (0.0, 199.0), 0.2, "x").unwrap();
        let shift = line_shift(&spec, &spec, (3.0, 12.0)).unwrap();
        assert_eq!(shift.delta, 0.0);
    }

    #[test]
    fn synthetic_doublet_is_recovered() {
        // Two lines 0.48 omega apart around 7 omega.
        let omega = 0.2;
        let w1 = 6.76 * omega;
        let w2 = 7.24 * omega;
        let s = cosine_series(&[(w1, 1.0), (w2, 0.7)], 0.05, 16000);
        let spec = radiation_spectrum(&s, (0.0, 799.0), omega, "x").unwrap();
        let m = splitting_analysis(&spec, (5.0, 9.0), 1e-3).unwrap();
        assert_eq!(m.positions.len(), 2, "positions: {:?}", m.positions);
        assert_relative_eq!(m.positions[0], 6.76, epsilon = 0.02);
        assert_relative_eq!(m.positions[1], 7.24, epsilon = 0.02);
        assert_relative_eq!(m.splittings[0], 0.48, epsilon = 0.02);

        // The components are also resolved by line_shift against a single line.
        let single = cosine_series(&[(7.0 * omega, 1.0)], 0.05, 16000);
        let sspec = radiation_spectrum(&single, (0.0, 799.0), omega, "x").unwrap();
        let shift = line_shift(&spec, &sspec, (6.3, 7.1)).unwrap();
        assert_relative_eq!(shift.delta, -0.24, epsilon = 0.02);
    }

    #[test]
    fn window_outside_recording_is_an_error() {
        let s = cosine_series(&[(1.0, 1.0)], 0.1, 100);
        assert!(radiation_spectrum(&s, (0.0, 50.0), 0.2, "x").is_err());
    }

    #[test]
    fn flat_band_has_no_dominant_peak() {
        let mut s = TimeSeriesRecord::new("a", "au");
        for i in 0..512 {
            s.push(i as f64, 0.0);
        }
        let spec = radiation_spectrum(&s, (0.0, 511.0), 1.0, "x").unwrap();
        assert!(dominant_peak(&spec, (0.05, 2.0)).is_err());
    }
}
