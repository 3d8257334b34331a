//! Run configuration: human-readable TOML with explicit unit tags, resolved
//! into atomic-units runtime objects, plus stable hashing for output
//! provenance and resume integrity.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::grid::Grid2D;
use crate::photoelectron::IonizationWindow;
use crate::potential::SoftCorePotential;
use crate::propagator::MaskFunction;
use crate::pulse::LaserPulse;
use crate::toggles::TermToggles;
use crate::units::{self, StrongFieldScales};
use crate::{FwError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub nx: usize,
    pub nz: usize,
    pub dx: f64,
    pub dz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialConfig {
    Softcore { k: f64, q_e: f64, z_charge: i32 },
    Free,
}

/// Laser parameters: exactly one of the intensity/field pair and one of the
/// wavelength/frequency pair must be set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LaserConfig {
    pub intensity_wcm2: Option<f64>,
    pub e0_au: Option<f64>,
    pub wavelength_nm: Option<f64>,
    pub omega_au: Option<f64>,
    pub turn_on_cycles: f64,
    pub plateau_cycles: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinChoice {
    Up,
    Down,
}

impl Default for SpinChoice {
    fn default() -> Self {
        SpinChoice::Up
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Field-free ground state of the configured potential (spin-polarized).
    GroundState {
        #[serde(default)]
        spin: SpinChoice,
    },
    Gaussian {
        x0: f64,
        z0: f64,
        sigma_x: f64,
        sigma_z: f64,
        kx: f64,
        kz: f64,
        #[serde(default)]
        spin: SpinChoice,
    },
    Snapshot { path: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AbsorberConfig {
    /// Mask band widths in bohr; negative means "10% of the box extent".
    pub width_x: f64,
    pub width_z: f64,
    /// Apply the mask every this many steps.
    pub cadence_steps: usize,
}

impl Default for AbsorberConfig {
    fn default() -> Self {
        AbsorberConfig {
            width_x: -1.0,
            width_z: -1.0,
            cadence_steps: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IonWindowConfig {
    pub x_inner: f64,
    pub x_slide: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuiverCheck {
    /// Refuse to run when the classical excursion does not fit.
    Enforce,
    /// Record a warning instead; bound multiphoton studies keep the
    /// wavepacket near the core and rely on the absorber for the rest.
    Warn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub name: String,
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    pub laser: Option<LaserConfig>,
    pub toggles: TermToggles,
    pub initial: InitialState,
    /// Time step in a.u.
    pub dt: f64,
    /// Field-free evolution window appended after the pulse, in laser cycles.
    pub post_pulse_cycles: f64,
    /// Total simulated time for runs without a laser.
    pub total_time_au: Option<f64>,
    pub record_every_steps: usize,
    pub absorber: Option<AbsorberConfig>,
    pub ionization_window: Option<IonWindowConfig>,
    /// Center-of-mass recording window half-widths (x, z), when restricted.
    pub com_window: Option<(f64, f64)>,
    pub checkpoint_every_steps: usize,
    pub nan_check_every_steps: usize,
    /// Keep the running flux accumulator for photoelectron spectra (only
    /// meaningful with an absorber). Disable for runs that never build a
    /// spectrum to save the per-step transform of the flux.
    pub flux_ledger: bool,
    pub flux_spill: bool,
    pub quiver_check: QuiverCheck,
    /// Apply the acceleration correction Laplacian to the force as a local
    /// function instead of to the force-times-wavefunction product.
    pub accel_laplacian_on_force: bool,
    /// Runs are deterministic by construction (no stochastic elements and
    /// thread-count independent reductions); kept as an explicit contract.
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "run".to_string(),
            grid: GridConfig {
                nx: 256,
                nz: 256,
                dx: 0.2,
                dz: 0.2,
            },
            potential: PotentialConfig::Free,
            laser: None,
            toggles: TermToggles::default(),
            initial: InitialState::Gaussian {
                x0: 0.0,
                z0: 0.0,
                sigma_x: 2.0,
                sigma_z: 2.0,
                kx: 0.0,
                kz: 0.0,
                spin: SpinChoice::Up,
            },
            dt: 1e-3,
            post_pulse_cycles: 0.0,
            total_time_au: None,
            record_every_steps: 8,
            absorber: None,
            ionization_window: None,
            com_window: None,
            checkpoint_every_steps: 0,
            nan_check_every_steps: 100,
            flux_ledger: true,
            flux_spill: false,
            quiver_check: QuiverCheck::Enforce,
            accel_laplacian_on_force: false,
            deterministic: true,
        }
    }
}

/// Everything a run needs, in atomic units.
pub struct Resolved {
    pub grid: Arc<Grid2D>,
    pub potential: Option<SoftCorePotential>,
    pub pulse: Option<LaserPulse>,
    pub toggles: TermToggles,
    pub dt: f64,
    pub n_steps: usize,
    pub t_end: f64,
    pub record_every: usize,
    pub absorber: Option<(MaskFunction, usize)>,
    pub ion_window: Option<IonizationWindow>,
    pub scales: Option<StrongFieldScales>,
    pub warnings: Vec<String>,
    pub hash: String,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| FwError::Serde(e.to_string()))
    }

    /// Stable hash of the configuration (hex SHA-256 of its canonical JSON).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        hex_string(&h.finalize())
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.toggles.validate()?;
        let grid = Arc::new(Grid2D::new(
            self.grid.nx,
            self.grid.nz,
            self.grid.dx,
            self.grid.dz,
        )?);
        let potential = match &self.potential {
            PotentialConfig::Softcore { k, q_e, z_charge } => {
                Some(SoftCorePotential::new(*k, *q_e, *z_charge)?)
            }
            PotentialConfig::Free => None,
        };
        if self.dt == 0.0 || !self.dt.is_finite() {
            return Err(FwError::Config(format!("dt must be nonzero, got {}", self.dt)));
        }
        if self.record_every_steps == 0 {
            return Err(FwError::Config("record_every_steps must be >= 1".into()));
        }
        if !self.deterministic {
            return Err(FwError::Config(
                "stochastic runs are not supported; deterministic must stay true".into(),
            ));
        }

        let mut warnings = Vec::new();
        let (pulse, scales) = match &self.laser {
            Some(lc) => {
                let e0 = match (lc.e0_au, lc.intensity_wcm2) {
                    (Some(e0), None) => e0,
                    (None, Some(i)) => units::intensity_to_field(i)?,
                    (Some(_), Some(_)) => {
                        return Err(FwError::Config(
                            "set either e0_au or intensity_wcm2, not both".into(),
                        ))
                    }
                    (None, None) => {
                        return Err(FwError::Config(
                            "laser needs e0_au or intensity_wcm2".into(),
                        ))
                    }
                };
                let omega = match (lc.omega_au, lc.wavelength_nm) {
                    (Some(w), None) => w,
                    (None, Some(l)) => units::wavelength_to_omega(l)?,
                    (Some(_), Some(_)) => {
                        return Err(FwError::Config(
                            "set either omega_au or wavelength_nm, not both".into(),
                        ))
                    }
                    (None, None) => {
                        return Err(FwError::Config(
                            "laser needs omega_au or wavelength_nm".into(),
                        ))
                    }
                };
                let pulse = LaserPulse::new(
                    e0,
                    omega,
                    lc.turn_on_cycles,
                    lc.plateau_cycles,
                    self.toggles.c(),
                    self.toggles.dipole_approximation,
                )?;
                if pulse.turn_on_adjustment.abs() > 1e-12 {
                    warnings.push(format!(
                        "turn-on adjusted from {} to {} cycles for a continuous vector potential",
                        lc.turn_on_cycles, pulse.turn_on_cycles
                    ));
                }
                let ip = potential
                    .map(|p| p.value(0.0, 0.0).abs() - p.harmonic_frequency())
                    .unwrap_or(0.0)
                    .max(0.0);
                (Some(pulse), Some(units::ponderomotive_and_keldysh(e0, omega, ip)))
            }
            None => (None, None),
        };

        let t_end = match (&pulse, self.total_time_au) {
            (Some(p), extra) => {
                let base = p.t_p + self.post_pulse_cycles * p.period();
                extra.map_or(base, |t| t.max(base))
            }
            (None, Some(t)) => t,
            (None, None) => {
                return Err(FwError::Config(
                    "field-free runs need total_time_au".into(),
                ))
            }
        };
        let n_steps = (t_end / self.dt - 1e-9).ceil().max(1.0) as usize;

        let absorber = match &self.absorber {
            Some(a) => {
                if a.cadence_steps == 0 {
                    return Err(FwError::Config("absorber cadence must be >= 1".into()));
                }
                let default = MaskFunction::default_for(&grid);
                let mask = MaskFunction {
                    width_x: if a.width_x < 0.0 { default.width_x } else { a.width_x },
                    width_z: if a.width_z < 0.0 { default.width_z } else { a.width_z },
                };
                mask.sample(&grid)?; // validate now
                Some((mask, a.cadence_steps))
            }
            None => None,
        };

        let ion_window = match (self.ionization_window, &potential, &absorber) {
            (Some(w), _, _) => Some(IonizationWindow {
                x_inner: w.x_inner,
                x_slide: w.x_slide,
            }),
            (None, Some(p), Some(_)) => Some(IonizationWindow {
                x_inner: 5.0 * p.ground_radius_estimate(),
                x_slide: 10.0,
            }),
            _ => None,
        };
        if let Some(w) = &ion_window {
            w.validate(&grid)?;
        }

        // Up-front excursion check: the classical quiver along x plus the
        // magnetic drift along z must fit inside the non-absorbing region.
        if let (Some(p), Some(s)) = (&pulse, &scales) {
            let (mask_x, mask_z) = absorber
                .as_ref()
                .map(|(m, _)| (m.width_x, m.width_z))
                .unwrap_or((0.0, 0.0));
            let avail_x = grid.x_max() - mask_x;
            let avail_z = grid.z_max() - mask_z;
            let drift = s.up / self.toggles.c() * p.t_p;
            let mut problems = Vec::new();
            if s.quiver_amplitude > avail_x {
                problems.push(format!(
                    "quiver amplitude {:.1} bohr exceeds the non-absorbing x half-width {:.1}",
                    s.quiver_amplitude, avail_x
                ));
            }
            if !self.toggles.dipole_approximation && drift > avail_z {
                problems.push(format!(
                    "magnetic drift {:.1} bohr over the pulse exceeds the non-absorbing z half-width {:.1}",
                    drift, avail_z
                ));
            }
            if !problems.is_empty() {
                match self.quiver_check {
                    QuiverCheck::Enforce => {
                        return Err(FwError::Config(format!(
                            "grid too small for the requested intensity: {}",
                            problems.join("; ")
                        )))
                    }
                    QuiverCheck::Warn => warnings.extend(problems),
                }
            }
        }

        Ok(Resolved {
            grid,
            potential,
            pulse,
            toggles: self.toggles,
            dt: self.dt,
            n_steps,
            t_end,
            record_every: self.record_every_steps,
            absorber,
            ion_window,
            scales,
            warnings,
            hash: self.hash(),
        })
    }
}

/// 64-bit hash of the toggles, embedded in snapshot headers.
pub fn toggles_hash(t: &TermToggles) -> u64 {
    let json = serde_json::to_string(t).expect("toggles serialize");
    let mut h = Sha256::new();
    h.update(json.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
