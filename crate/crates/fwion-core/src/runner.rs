//! Run orchestration: initial state preparation (with an eigenstate cache),
//! the propagation loop with recording, absorber/ledger handling, checkpoint
//! and resume, and file-based post-processing used by the CLI.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{toggles_hash, InitialState, Resolved, RunConfig, SpinChoice};
use crate::eigen::{self, EigenResult, RelaxConfig};
use crate::grid::Grid2D;
use crate::observables::{
    acceleration, radiation_spectrum, Acceleration, AccelerationTables, LaplacianMode,
    SpectrumRecord, TimeSeriesRecord,
};
use crate::photoelectron::{
    energy_spectrum, momentum_spectrum, slice_residual, EnergySpectrum, FluxLedger,
    IonizationWindow,
};
use crate::propagator::PropagatorPlan;
use crate::snapshot;
use crate::spinor::SpinorWavefunction;
use crate::{FwError, Result};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// eigenstate cache

static EIGEN_CACHE: OnceLock<Mutex<HashMap<String, Arc<EigenResult>>>> = OnceLock::new();

fn eigen_cache_key(p: &crate::SoftCorePotential, grid: &Grid2D) -> String {
    format!(
        "k={};qe={};z={};{}x{};dx={};dz={}",
        p.k, p.q_e, p.z_charge, grid.nx, grid.nz, grid.dx, grid.dz
    )
}

/// Imaginary-time states for a potential/grid pair, cached per process.
/// A cached result with at least `n_states` states is reused as is.
pub fn cached_eigenstates(
    p: &crate::SoftCorePotential,
    grid: &Arc<Grid2D>,
    n_states: usize,
) -> Result<Arc<EigenResult>> {
    let cache = EIGEN_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = eigen_cache_key(p, grid);
    {
        let map = cache.lock().unwrap();
        if let Some(r) = map.get(&key) {
            if r.levels.len() >= n_states {
                return Ok(r.clone());
            }
        }
    }
    let v = p.sample_value(grid);
    let cfg = RelaxConfig::for_softcore(p);
    let result = Arc::new(eigen::imaginary_time_relax(&v, grid, n_states, &cfg)?);
    cache.lock().unwrap().insert(key, result.clone());
    Ok(result)
}

// ---------------------------------------------------------------------------
// recorder

struct Recorder {
    series: Vec<TimeSeriesRecord>,
    has_window: bool,
    has_force: bool,
}

impl Recorder {
    fn new(has_window: bool, has_force: bool) -> Self {
        let mut series = vec![
            TimeSeriesRecord::new("norm", "1"),
            TimeSeriesRecord::new("x_mean", "bohr"),
            TimeSeriesRecord::new("z_mean", "bohr"),
        ];
        if has_window {
            series.push(TimeSeriesRecord::new("x_mean_win", "bohr"));
            series.push(TimeSeriesRecord::new("z_mean_win", "bohr"));
        }
        if has_force {
            series.push(TimeSeriesRecord::new("ax_plain", "au"));
            series.push(TimeSeriesRecord::new("az_plain", "au"));
            series.push(TimeSeriesRecord::new("ax_rel", "au"));
            series.push(TimeSeriesRecord::new("az_rel", "au"));
        }
        series.push(TimeSeriesRecord::new("p_down", "1"));
        series.push(TimeSeriesRecord::new("e_field", "au"));
        Recorder {
            series,
            has_window,
            has_force,
        }
    }

    fn sample(
        &mut self,
        psi: &SpinorWavefunction,
        accel: Option<Acceleration>,
        e_field: f64,
        window: Option<(f64, f64)>,
    ) {
        let t = psi.time;
        let (x, z) = psi.center_of_mass(None);
        let mut idx = 0;
        let mut push = |series: &mut Vec<TimeSeriesRecord>, v: f64| {
            series[idx].push(t, v);
            idx += 1;
        };
        push(&mut self.series, psi.norm());
        push(&mut self.series, x);
        push(&mut self.series, z);
        if self.has_window {
            let (xw, zw) = psi.center_of_mass(window);
            push(&mut self.series, xw);
            push(&mut self.series, zw);
        }
        if self.has_force {
            let a = accel.unwrap_or_default();
            push(&mut self.series, a.plain_x);
            push(&mut self.series, a.plain_z);
            push(&mut self.series, a.corrected_x);
            push(&mut self.series, a.corrected_z);
        }
        push(&mut self.series, psi.spin_down_population());
        push(&mut self.series, e_field);
    }
}

// ---------------------------------------------------------------------------
// manifest

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_hash: String,
    pub code_version: String,
    pub steps_done: usize,
    pub n_steps: usize,
    pub t_end: f64,
    pub complete: bool,
    pub warnings: Vec<String>,
    pub pulse_t_on: Option<f64>,
    pub pulse_t_p: Option<f64>,
    pub pulse_omega: Option<f64>,
    pub ground_energy: Option<f64>,
    pub removed_probability: f64,
    pub elapsed_seconds: f64,
}

// ---------------------------------------------------------------------------
// runner

pub struct RunArtifacts {
    pub config: RunConfig,
    pub hash: String,
    pub series: Vec<TimeSeriesRecord>,
    pub psi: SpinorWavefunction,
    pub ledger: Option<FluxLedger>,
    pub eigen: Option<Arc<EigenResult>>,
    pub warnings: Vec<String>,
    pub steps_done: usize,
    pub pulse: Option<crate::LaserPulse>,
    pub manifest: Manifest,
}

impl RunArtifacts {
    pub fn series(&self, name: &str) -> Option<&TimeSeriesRecord> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Radiation spectrum of one recorded acceleration channel over the
    /// constant-amplitude plateau (default) or an explicit window.
    pub fn spectrum(&self, channel: &str, window: Option<(f64, f64)>) -> Result<SpectrumRecord> {
        let series = self
            .series(channel)
            .ok_or_else(|| FwError::Config(format!("no recorded channel '{channel}'")))?;
        let pulse = self
            .pulse
            .as_ref()
            .ok_or_else(|| FwError::Config("run had no laser; give an explicit window".into()))?;
        // The recorder samples on cadence multiples; the default plateau
        // window clamps to what was actually recorded.
        let t_last = *series.times.last().unwrap_or(&0.0);
        let w = window.unwrap_or((pulse.t_on, pulse.t_p.min(t_last)));
        radiation_spectrum(series, w, pulse.omega, &channel.replace("a", ""))
    }

    /// Photoelectron energy spectrum from the ledger plus the windowed
    /// in-box residual.
    pub fn photoelectron_spectrum(&self, window: Option<IonizationWindow>) -> Result<EnergySpectrum> {
        let ledger = self
            .ledger
            .as_ref()
            .ok_or_else(|| FwError::Config("run had no absorber/ledger".into()))?;
        let res = self.config.resolve()?;
        let w = window
            .or(res.ion_window)
            .ok_or_else(|| FwError::Config("no ionization window configured".into()))?;
        let engine = crate::fft::FftEngine::new(&self.psi.grid);
        let out = slice_residual(&self.psi, w)?;
        let ms = momentum_spectrum(ledger, Some(&out), self.psi.time, &engine);
        Ok(energy_spectrum(&ms, res.toggles.c()))
    }
}

pub struct Runner {
    pub config: RunConfig,
    res: Resolved,
    plan: PropagatorPlan,
    psi: SpinorWavefunction,
    flux_buf: Option<SpinorWavefunction>,
    ledger: Option<FluxLedger>,
    recorder: Recorder,
    accel_tables: Option<AccelerationTables>,
    laplacian_mode: LaplacianMode,
    step_index: usize,
    out_dir: Option<PathBuf>,
    spill: Option<BufWriter<File>>,
    eigen: Option<Arc<EigenResult>>,
    started: Instant,
    elapsed_before_resume: f64,
    removed_without_ledger: f64,
}

impl Runner {
    pub fn new(config: RunConfig, out_dir: Option<PathBuf>) -> Result<Self> {
        let res = config.resolve()?;
        let (psi, eigen) = build_initial_state(&config, &res)?;
        Self::assemble(config, res, psi, eigen, None, 0, out_dir, Vec::new())
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        config: RunConfig,
        res: Resolved,
        psi: SpinorWavefunction,
        eigen: Option<Arc<EigenResult>>,
        ledger: Option<FluxLedger>,
        step_index: usize,
        out_dir: Option<PathBuf>,
        restored_series: Vec<TimeSeriesRecord>,
    ) -> Result<Self> {
        let plan = PropagatorPlan::new(
            res.grid.clone(),
            res.potential.as_ref(),
            res.pulse,
            res.toggles,
            res.dt,
            res.absorber.as_ref().map(|(m, _)| *m),
        )?;
        let accel_tables = res.potential.as_ref().map(|p| {
            let (fx, fz) = p.sample_force(&res.grid);
            AccelerationTables::new(fx, fz, &res.grid, plan.engine())
        });
        let has_absorber = res.absorber.is_some();
        let ledger = match ledger {
            Some(l) => Some(l),
            None if has_absorber && config.flux_ledger => {
                Some(FluxLedger::new(res.grid.clone()))
            }
            None => None,
        };
        let flux_buf = (has_absorber && (ledger.is_some() || config.flux_spill))
            .then(|| SpinorWavefunction::zeros(res.grid.clone()));
        let mut recorder = Recorder::new(config.com_window.is_some(), accel_tables.is_some());
        if !restored_series.is_empty() {
            recorder.series = restored_series;
        }
        let spill = match (&out_dir, config.flux_spill) {
            (Some(dir), true) => {
                std::fs::create_dir_all(dir)?;
                let file = File::options()
                    .create(true)
                    .append(true)
                    .open(dir.join("flux_spill.bin"))?;
                Some(BufWriter::new(file))
            }
            _ => None,
        };
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir)?;
        }
        let laplacian_mode = if config.accel_laplacian_on_force {
            LaplacianMode::OnForce
        } else {
            LaplacianMode::OnProduct
        };
        let mut runner = Runner {
            config,
            res,
            plan,
            psi,
            flux_buf,
            ledger,
            recorder,
            accel_tables,
            laplacian_mode,
            step_index,
            out_dir,
            spill,
            eigen,
            started: Instant::now(),
            elapsed_before_resume: 0.0,
            removed_without_ledger: 0.0,
        };
        if runner.step_index == 0 && runner.recorder.series[0].times.is_empty() {
            runner.record_sample();
        }
        Ok(runner)
    }

    pub fn steps_total(&self) -> usize {
        self.res.n_steps
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    fn record_sample(&mut self) {
        let accel = self.accel_tables.as_ref().map(|tables| {
            acceleration(
                &self.psi,
                tables,
                self.plan.engine(),
                self.res.toggles.c(),
                self.laplacian_mode,
            )
        });
        let e_field = self
            .res
            .pulse
            .map(|p| p.e_x(0.0, self.psi.time))
            .unwrap_or(0.0);
        self.recorder
            .sample(&self.psi, accel, e_field, self.config.com_window);
    }

    /// Advances until completion or `halt_after` steps, whichever is first.
    /// Returns true when the run is complete.
    pub fn run_until(&mut self, halt_after: Option<usize>) -> Result<bool> {
        let stop = halt_after
            .map(|h| h.min(self.res.n_steps))
            .unwrap_or(self.res.n_steps);
        let (cadence, _) = self
            .res
            .absorber
            .as_ref()
            .map(|(_, c)| (*c, ()))
            .unwrap_or((usize::MAX, ()));
        while self.step_index < stop {
            self.plan.step(&mut self.psi)?;
            self.step_index += 1;

            if self.step_index % cadence == 0 {
                if self.ledger.is_some() || self.spill.is_some() {
                    let flux = self.flux_buf.as_mut().expect("flux buffer with absorber");
                    let removed = self.plan.apply_absorber(&mut self.psi, Some(flux));
                    if let Some(spill) = self.spill.as_mut() {
                        snapshot::append_flux_frame(spill, flux, toggles_hash(&self.res.toggles))?;
                    }
                    if let Some(ledger) = self.ledger.as_mut() {
                        ledger.accumulate(flux, self.plan.engine(), removed);
                    }
                } else {
                    self.removed_without_ledger +=
                        self.plan.apply_absorber(&mut self.psi, None);
                }
            }
            if self.step_index % self.res.record_every == 0 {
                self.record_sample();
            }
            if self.step_index % self.config.nan_check_every_steps.max(1) == 0 {
                PropagatorPlan::check_finite(&self.psi)?;
            }
            if self.out_dir.is_some()
                && self.config.checkpoint_every_steps > 0
                && self.step_index % self.config.checkpoint_every_steps == 0
            {
                self.write_checkpoint()?;
            }
        }
        let complete = self.step_index >= self.res.n_steps;
        if !complete && self.out_dir.is_some() {
            self.write_checkpoint()?;
        }
        Ok(complete)
    }

    fn manifest(&self, complete: bool) -> Manifest {
        Manifest {
            name: self.config.name.clone(),
            config_hash: self.res.hash.clone(),
            code_version: CODE_VERSION.to_string(),
            steps_done: self.step_index,
            n_steps: self.res.n_steps,
            t_end: self.res.t_end,
            complete,
            warnings: self.res.warnings.clone(),
            pulse_t_on: self.res.pulse.map(|p| p.t_on),
            pulse_t_p: self.res.pulse.map(|p| p.t_p),
            pulse_omega: self.res.pulse.map(|p| p.omega),
            ground_energy: self.eigen.as_ref().map(|e| e.ground_energy()),
            removed_probability: self
                .ledger
                .as_ref()
                .map(|l| l.removed_probability)
                .unwrap_or(self.removed_without_ledger),
            elapsed_seconds: self.elapsed_before_resume + self.started.elapsed().as_secs_f64(),
        }
    }

    fn write_checkpoint(&mut self) -> Result<()> {
        let dir = self.out_dir.clone().expect("checkpoint needs an output dir");
        if let Some(spill) = self.spill.as_mut() {
            spill.flush()?;
        }
        let th = toggles_hash(&self.res.toggles);
        snapshot::write_snapshot(&dir.join("checkpoint.snap"), &self.psi, th)?;
        if let Some(ledger) = &self.ledger {
            snapshot::write_ledger(&dir.join("checkpoint_ledger.bin"), ledger, th)?;
        }
        std::fs::write(dir.join("config.toml"), self.config.to_toml_string()?)?;
        write_timeseries_csv(
            &dir.join("timeseries.csv"),
            &self.recorder.series,
            &self.res.hash,
        )?;
        let manifest = self.manifest(false);
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }

    /// Completes the run: writes final outputs when an output directory is
    /// configured and hands back everything in memory.
    pub fn finalize(mut self) -> Result<RunArtifacts> {
        let complete = self.step_index >= self.res.n_steps;
        let manifest = self.manifest(complete);
        if let Some(spill) = self.spill.as_mut() {
            spill.flush()?;
        }
        if let Some(dir) = &self.out_dir {
            let th = toggles_hash(&self.res.toggles);
            snapshot::write_snapshot(&dir.join("final_state.snap"), &self.psi, th)?;
            if let Some(ledger) = &self.ledger {
                snapshot::write_ledger(&dir.join("ledger.bin"), ledger, th)?;
            }
            std::fs::write(dir.join("config.toml"), self.config.to_toml_string()?)?;
            write_timeseries_csv(
                &dir.join("timeseries.csv"),
                &self.recorder.series,
                &self.res.hash,
            )?;
            std::fs::write(
                dir.join("manifest.json"),
                serde_json::to_string_pretty(&manifest)?,
            )?;
        }
        Ok(RunArtifacts {
            hash: self.res.hash.clone(),
            series: self.recorder.series,
            psi: self.psi,
            ledger: self.ledger,
            eigen: self.eigen,
            warnings: self.res.warnings.clone(),
            steps_done: self.step_index,
            pulse: self.res.pulse,
            manifest,
            config: self.config,
        })
    }

    /// Rebuilds a runner from a checkpointed run directory. Refuses to
    /// continue when the stored configuration hash, grid or toggles do not
    /// match, or when the flux ledger is missing for an absorbing run.
    pub fn resume(dir: &Path) -> Result<Self> {
        let config_text = std::fs::read_to_string(dir.join("config.toml"))?;
        let config = RunConfig::from_toml_str(&config_text)?;
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.config_hash != config.hash() {
            return Err(FwError::Integrity(format!(
                "config.toml hash {} does not match the manifest hash {}; refusing to resume \
                 a run whose parameters changed",
                config.hash(),
                manifest.config_hash
            )));
        }
        let res = config.resolve()?;
        let th = toggles_hash(&res.toggles);
        let psi = snapshot::read_snapshot(&dir.join("checkpoint.snap"), &res.grid, Some(th))?;
        let ledger = if res.absorber.is_some() {
            let path = dir.join("checkpoint_ledger.bin");
            if !path.exists() {
                return Err(FwError::Integrity(
                    "flux ledger checkpoint is missing; the photoelectron spectrum would be \
                     incomplete, refusing to resume"
                        .into(),
                ));
            }
            Some(snapshot::read_ledger(&path, &res.grid)?)
        } else {
            None
        };
        let series = read_timeseries_csv(&dir.join("timeseries.csv"))?;
        // Drop any samples recorded after the checkpoint.
        let series = series
            .into_iter()
            .map(|mut s| {
                let keep = s.times.iter().take_while(|&&t| t <= psi.time + 1e-12).count();
                s.times.truncate(keep);
                s.values.truncate(keep);
                s
            })
            .collect();
        let step_index = manifest.steps_done;
        let eigen = res
            .potential
            .as_ref()
            .filter(|_| matches!(config.initial, InitialState::GroundState { .. }))
            .map(|p| cached_eigenstates(p, &res.grid, 1))
            .transpose()?;
        let elapsed = manifest.elapsed_seconds;
        let mut runner = Self::assemble(
            config,
            res,
            psi,
            eigen,
            ledger,
            step_index,
            Some(dir.to_path_buf()),
            series,
        )?;
        runner.elapsed_before_resume = elapsed;
        Ok(runner)
    }
}

fn build_initial_state(
    config: &RunConfig,
    res: &Resolved,
) -> Result<(SpinorWavefunction, Option<Arc<EigenResult>>)> {
    match &config.initial {
        InitialState::Gaussian {
            x0,
            z0,
            sigma_x,
            sigma_z,
            kx,
            kz,
            spin,
        } => {
            let mut psi = SpinorWavefunction::gaussian(
                res.grid.clone(),
                (*x0, *z0),
                (*sigma_x, *sigma_z),
                (*kx, *kz),
            );
            if *spin == SpinChoice::Down {
                std::mem::swap(&mut psi.up, &mut psi.down);
            }
            Ok((psi, None))
        }
        InitialState::GroundState { spin } => {
            let p = res.potential.as_ref().ok_or_else(|| {
                FwError::Config("ground-state initial condition needs a potential".into())
            })?;
            let eigen = cached_eigenstates(p, &res.grid, 1)?;
            let spin_amp = match spin {
                SpinChoice::Up => (Complex64::from(1.0), Complex64::from(0.0)),
                SpinChoice::Down => (Complex64::from(0.0), Complex64::from(1.0)),
            };
            let mut psi = SpinorWavefunction::from_scalar(
                res.grid.clone(),
                eigen.states[0].clone(),
                spin_amp,
            );
            psi.renormalize();
            Ok((psi, Some(eigen)))
        }
        InitialState::Snapshot { path } => {
            let psi = snapshot::read_snapshot(Path::new(path), &res.grid, None)?;
            Ok((psi, None))
        }
    }
}

/// Runs a configuration to completion entirely in memory.
pub fn run_to_artifacts(config: &RunConfig) -> Result<RunArtifacts> {
    let mut runner = Runner::new(config.clone(), None)?;
    runner.run_until(None)?;
    runner.finalize()
}

/// Runs a configuration writing the full output set into `dir`.
pub fn execute(config: &RunConfig, dir: &Path) -> Result<RunArtifacts> {
    let mut runner = Runner::new(config.clone(), Some(dir.to_path_buf()))?;
    runner.run_until(None)?;
    runner.finalize()
}

// ---------------------------------------------------------------------------
// CSV io

/// Writes the recorded series as CSV: metadata comments, a name row, a unit
/// row, then one row per sample. 17 significant digits round-trip doubles
/// exactly, which keeps resumed runs byte-identical.
pub fn write_timeseries_csv(
    path: &Path,
    series: &[TimeSeriesRecord],
    config_hash: &str,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# fwion {CODE_VERSION} config_hash={config_hash}")?;
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    let units: Vec<&str> = series.iter().map(|s| s.unit.as_str()).collect();
    writeln!(w, "t,{}", names.join(","))?;
    writeln!(w, "au,{}", units.join(","))?;
    let n = series.first().map(|s| s.times.len()).unwrap_or(0);
    for i in 0..n {
        write!(w, "{:.17e}", series[0].times[i])?;
        for s in series {
            write!(w, ",{:.17e}", s.values[i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_timeseries_csv(path: &Path) -> Result<Vec<TimeSeriesRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let names: Vec<String> = lines
        .next()
        .ok_or_else(|| FwError::Integrity("empty timeseries csv".into()))?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let units: Vec<String> = lines
        .next()
        .ok_or_else(|| FwError::Integrity("timeseries csv lacks a unit row".into()))?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    if names.len() != units.len() || names.len() < 2 || names[0] != "t" {
        return Err(FwError::Integrity("malformed timeseries csv header".into()));
    }
    let mut series: Vec<TimeSeriesRecord> = names[1..]
        .iter()
        .zip(units[1..].iter())
        .map(|(n, u)| TimeSeriesRecord::new(n, u))
        .collect();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let t: f64 = parts
            .next()
            .unwrap()
            .parse()
            .map_err(|e| FwError::Integrity(format!("bad csv number: {e}")))?;
        for s in series.iter_mut() {
            let v: f64 = parts
                .next()
                .ok_or_else(|| FwError::Integrity("short csv row".into()))?
                .parse()
                .map_err(|e| FwError::Integrity(format!("bad csv number: {e}")))?;
            s.push(t, v);
        }
    }
    Ok(series)
}

pub fn write_spectrum_csv(path: &Path, spec: &SpectrumRecord, config_hash: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# fwion {CODE_VERSION} config_hash={config_hash}")?;
    writeln!(
        w,
        "# polarization={} omega_ref={:.12e} window=[{:.12e},{:.12e}]",
        spec.polarization, spec.omega_ref, spec.window.0, spec.window.1
    )?;
    writeln!(w, "freq_omega,power,log10_power")?;
    writeln!(w, "omega_units,arb,arb")?;
    for (f, p) in spec.freq_omega.iter().zip(spec.power.iter()) {
        let logp = if *p > 0.0 { p.log10() } else { -320.0 };
        writeln!(w, "{:.12e},{:.12e},{:.6}", f, p, logp)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pes_csv(path: &Path, es: &EnergySpectrum, config_hash: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# fwion {CODE_VERSION} config_hash={config_hash}")?;
    writeln!(
        w,
        "# total_probability={:.12e}",
        es.total_probability
    )?;
    writeln!(w, "eps_au,eps_ev,p_positive,p_negative,p_combined")?;
    writeln!(w, "hartree,eV,per_au,per_au,per_au")?;
    for j in 0..es.eps_au.len() {
        writeln!(
            w,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            es.eps_au[j], es.eps_ev[j], es.positive[j], es.negative[j], es.combined[j]
        )?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// file-based post-processing (CLI back ends)

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&std::fs::read_to_string(
        dir.join("manifest.json"),
    )?)?)
}

/// Photoelectron spectrum from a finished run directory.
pub fn pes_from_run_dir(
    dir: &Path,
    window_override: Option<IonizationWindow>,
) -> Result<EnergySpectrum> {
    let config = RunConfig::from_toml_str(&std::fs::read_to_string(dir.join("config.toml"))?)?;
    let res = config.resolve()?;
    let psi = snapshot::read_snapshot(
        &dir.join("final_state.snap"),
        &res.grid,
        Some(toggles_hash(&res.toggles)),
    )?;
    let ledger_path = dir.join("ledger.bin");
    let ledger = if ledger_path.exists() {
        snapshot::read_ledger(&ledger_path, &res.grid)?
    } else {
        let spill = dir.join("flux_spill.bin");
        if !spill.exists() {
            return Err(FwError::Integrity(
                "run directory has neither ledger.bin nor flux_spill.bin".into(),
            ));
        }
        let engine = crate::fft::FftEngine::new(&res.grid);
        let mut ledger = FluxLedger::new(res.grid.clone());
        for mut frame in snapshot::read_flux_frames(&spill, &res.grid)? {
            ledger.accumulate(&mut frame, &engine, 0.0);
        }
        ledger
    };
    let window = window_override.or(res.ion_window).ok_or_else(|| {
        FwError::Config("no ionization window configured for this run".into())
    })?;
    let engine = crate::fft::FftEngine::new(&res.grid);
    let out = slice_residual(&psi, window)?;
    let ms = momentum_spectrum(&ledger, Some(&out), psi.time, &engine);
    Ok(energy_spectrum(&ms, res.toggles.c()))
}

/// Radiation spectrum of one recorded channel of a finished run directory.
pub fn spectrum_from_run_dir(
    dir: &Path,
    channel: &str,
    window: Option<(f64, f64)>,
) -> Result<SpectrumRecord> {
    let manifest = read_manifest(dir)?;
    let series = read_timeseries_csv(&dir.join("timeseries.csv"))?;
    let record = series
        .iter()
        .find(|s| s.name == channel)
        .ok_or_else(|| FwError::Config(format!("channel '{channel}' not recorded")))?;
    let omega = manifest
        .pulse_omega
        .ok_or_else(|| FwError::Config("run had no laser".into()))?;
    let t_last = *record.times.last().unwrap_or(&0.0);
    let w = match window {
        Some(w) => w,
        None => (
            manifest.pulse_t_on.unwrap_or(0.0),
            manifest.pulse_t_p.unwrap_or(manifest.t_end).min(t_last),
        ),
    };
    radiation_spectrum(record, w, omega, channel)
}

/// Aligned difference of one recorded observable between two run directories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffReport {
    pub observable: String,
    pub n_samples: usize,
    pub max_abs_diff: f64,
    pub rms_diff: f64,
}

pub fn compare_series(dir_a: &Path, dir_b: &Path, observable: &str) -> Result<DiffReport> {
    let sa = read_timeseries_csv(&dir_a.join("timeseries.csv"))?;
    let sb = read_timeseries_csv(&dir_b.join("timeseries.csv"))?;
    let a = sa
        .iter()
        .find(|s| s.name == observable)
        .ok_or_else(|| FwError::Config(format!("'{observable}' not in run A")))?;
    let b = sb
        .iter()
        .find(|s| s.name == observable)
        .ok_or_else(|| FwError::Config(format!("'{observable}' not in run B")))?;
    if a.times.len() != b.times.len()
        || a.times
            .iter()
            .zip(b.times.iter())
            .any(|(x, y)| (x - y).abs() > 1e-9)
    {
        return Err(FwError::Config(
            "runs have mismatched recording axes; compare needs identical grids and cadences"
                .into(),
        ));
    }
    let mut max_abs: f64 = 0.0;
    let mut sq = 0.0;
    for (x, y) in a.values.iter().zip(b.values.iter()) {
        let d = (x - y).abs();
        max_abs = max_abs.max(d);
        sq += d * d;
    }
    Ok(DiffReport {
        observable: observable.to_string(),
        n_samples: a.values.len(),
        max_abs_diff: max_abs,
        rms_diff: (sq / a.values.len().max(1) as f64).sqrt(),
    })
}
