//! Physics-level integration tests of the propagator against independent
//! references: eigenstate phase evolution, global convergence order, the
//! Ehrenfest theorem and the classical weakly relativistic trajectory.

mod common;

use std::sync::Arc;

use common::{slope, ClassicalOracle, ClassicalState};
use fwion_core::config::{
    GridConfig, InitialState, LaserConfig, PotentialConfig, QuiverCheck, RunConfig, SpinChoice,
};
use fwion_core::eigen::{imaginary_time_relax, RelaxConfig};
use fwion_core::propagator::PropagatorPlan;
use fwion_core::pulse::LaserPulse;
use fwion_core::runner::run_to_artifacts;
use fwion_core::spinor::SpinorWavefunction;
use fwion_core::toggles::TermToggles;
use fwion_core::units::C_AU;
use fwion_core::{Grid2D, SoftCorePotential};

#[test]
fn eigenstate_acquires_pure_phase_under_field_free_stepping() {
    let grid = Arc::new(Grid2D::new(96, 96, 0.25, 0.25).unwrap());
    let p = SoftCorePotential::new(6.48, 1.0, 3).unwrap();
    let v = p.sample_value(&grid);
    let relax = imaginary_time_relax(&v, &grid, 1, &RelaxConfig::for_softcore(&p)).unwrap();
    let e_g = relax.levels[0].energy;

    let psi0 = SpinorWavefunction::from_scalar(
        grid.clone(),
        relax.states[0].clone(),
        (1.0.into(), 0.0.into()),
    );
    let dt = 1e-3;
    let mut plan = PropagatorPlan::new(
        grid.clone(),
        Some(&p),
        None,
        TermToggles::default(),
        dt,
        None,
    )
    .unwrap();
    let mut psi = psi0.clone();
    let mut phases = Vec::new();
    for step in 1..=100 {
        plan.step(&mut psi).unwrap();
        let overlap = psi0.inner(&psi);
        assert!(
            (overlap.norm() - 1.0).abs() < 1e-6,
            "overlap lost at step {step}: {}",
            overlap.norm()
        );
        phases.push((step as f64 * dt, overlap.arg()));
    }
    // Unwrap is unnecessary here: |E_g| dt ~ 5e-3 per step.
    let fitted = slope(&phases);
    assert!(
        ((fitted - (-e_g)) / e_g).abs() < 1e-3,
        "phase slope {fitted} vs -E_g {}",
        -e_g
    );
}

#[test]
fn global_error_scales_as_dt_squared() {
    // <x(T)> error against a dt/4 reference across a dt ladder; the
    // time-symmetric factor ordering must give slope 2.
    let grid = Arc::new(Grid2D::new(96, 96, 0.25, 0.25).unwrap());
    let p = SoftCorePotential::new(6.48, 1.0, 3).unwrap();
    let pulse = LaserPulse::new(0.15, 0.7, 1.25, 1.0, C_AU, false).unwrap();
    let toggles = TermToggles::all_on();
    let t_end = pulse.t_p;

    let x_final = |dt: f64| -> f64 {
        let mut plan =
            PropagatorPlan::new(grid.clone(), Some(&p), Some(pulse), toggles, dt, None).unwrap();
        let mut psi =
            SpinorWavefunction::gaussian(grid.clone(), (0.0, 0.0), (0.9, 0.9), (0.0, 0.0));
        let n = (t_end / dt).round() as usize;
        for _ in 0..n {
            plan.step(&mut psi).unwrap();
        }
        psi.center_of_mass(None).0
    };

    // dt ladder plus the dt/4 references, each run once.
    let dts = [8e-3, 4e-3, 2e-3];
    let mut finals = std::collections::HashMap::new();
    for &dt in &[8e-3, 4e-3, 2e-3, 1e-3, 5e-4] {
        finals.insert((dt * 1e6) as i64, x_final(dt));
    }
    let points: Vec<(f64, f64)> = dts
        .iter()
        .map(|&dt| {
            let a = finals[&((dt * 1e6) as i64)];
            let b = finals[&((dt / 4.0 * 1e6) as i64)];
            (dt.ln(), (a - b).abs().ln())
        })
        .collect();
    let s = slope(&points);
    assert!(
        (1.8..=2.2).contains(&s),
        "convergence slope {s}, points {points:?}"
    );
}

#[test]
fn classical_oracle_matches_free_wavepacket_drift() {
    // V = 0 wavepacket against the RK4 trajectory of the same Hamiltonian,
    // two cycles at 1e16 W/cm^2, 248 nm. The packet returns <x>, <z>; the
    // magnetic drift and quiver must agree within 5% of the amplitudes.
    let e0 = fwion_core::units::intensity_to_field(1e16).unwrap();
    let omega = fwion_core::units::wavelength_to_omega(248.0).unwrap();
    let pulse = LaserPulse::new(e0, omega, 1.25, 1.0, C_AU, false).unwrap();
    let t_end = pulse.t_p;

    let cfg = RunConfig {
        name: "classical_check".into(),
        grid: GridConfig {
            nx: 320,
            nz: 256,
            dx: 0.35,
            dz: 0.35,
        },
        potential: PotentialConfig::Free,
        laser: Some(LaserConfig {
            e0_au: Some(e0),
            omega_au: Some(omega),
            turn_on_cycles: 1.25,
            plateau_cycles: 1.0,
            ..Default::default()
        }),
        toggles: TermToggles {
            mass_shift: true,
            ..Default::default()
        },
        initial: InitialState::Gaussian {
            x0: 0.0,
            z0: 0.0,
            sigma_x: 4.0,
            sigma_z: 4.0,
            kx: 0.0,
            kz: 0.0,
            spin: SpinChoice::Up,
        },
        dt: 0.02,
        record_every_steps: 4,
        quiver_check: QuiverCheck::Warn,
        ..Default::default()
    };
    let arts = run_to_artifacts(&cfg).unwrap();

    let oracle = ClassicalOracle {
        pulse: &pulse,
        potential: None,
        mass_shift: true,
        c: C_AU,
    };
    let start = ClassicalState {
        x: 0.0,
        z: 0.0,
        px: 0.0,
        pz: 0.0,
    };
    let reference = oracle.trajectory(start, t_end, 2e-3, 10);

    let xq = arts.series("x_mean").unwrap();
    let zq = arts.series("z_mean").unwrap();
    let x_cl: Vec<(f64, f64)> = reference.iter().map(|&(t, s)| (t, s.x)).collect();
    let z_cl: Vec<(f64, f64)> = reference.iter().map(|&(t, s)| (t, s.z)).collect();
    let x_amp = x_cl.iter().map(|p| p.1.abs()).fold(0.0_f64, f64::max);
    let z_amp = z_cl.iter().map(|p| p.1.abs()).fold(0.0_f64, f64::max);
    assert!(x_amp > 1.0, "quiver amplitude too small to test: {x_amp}");

    for (i, &t) in xq.times.iter().enumerate() {
        if t > t_end {
            break;
        }
        let dx = (xq.values[i] - common::interp(&x_cl, t)).abs();
        let dz = (zq.values[i] - common::interp(&z_cl, t)).abs();
        assert!(
            dx <= 0.05 * x_amp,
            "x deviation {dx} at t={t} exceeds 5% of {x_amp}"
        );
        assert!(
            dz <= 0.05 * z_amp.max(0.02 * x_amp),
            "z deviation {dz} at t={t} exceeds tolerance"
        );
    }

    // Forward magnetic drift: mean dz/dt over the final cycle is close to
    // U_p/c for a packet born at rest at the field zero.
    let up = e0 * e0 / (4.0 * omega * omega);
    let period = pulse.period();
    let zs: Vec<(f64, f64)> = zq
        .times
        .iter()
        .zip(zq.values.iter())
        .map(|(&t, &v)| (t, v))
        .collect();
    let z1 = common::interp(&zs, t_end);
    let z0 = common::interp(&zs, t_end - period);
    let v_drift = (z1 - z0) / period;
    let expected = up / C_AU;
    assert!(
        (v_drift / expected - 1.0).abs() < 0.3,
        "drift velocity {v_drift} vs U_p/c {expected}"
    );
}

#[test]
fn ehrenfest_force_balance_in_dipole_mode() {
    // Nonrelativistic toggles, dipole on: d2<x>/dt2 from the recorded series
    // must match <-dV/dx> - E(t) to 2% RMS, and <z> must stay pinned at zero.
    let cfg = RunConfig {
        name: "ehrenfest".into(),
        grid: GridConfig {
            nx: 128,
            nz: 128,
            dx: 0.25,
            dz: 0.25,
        },
        potential: PotentialConfig::Softcore {
            k: 6.48,
            q_e: 1.0,
            z_charge: 3,
        },
        laser: Some(LaserConfig {
            e0_au: Some(0.05),
            omega_au: Some(0.4),
            turn_on_cycles: 1.25,
            plateau_cycles: 2.0,
            ..Default::default()
        }),
        toggles: TermToggles::nonrelativistic(true),
        initial: InitialState::GroundState {
            spin: SpinChoice::Up,
        },
        dt: 2e-3,
        record_every_steps: 4,
        quiver_check: QuiverCheck::Warn,
        ..Default::default()
    };
    let arts = run_to_artifacts(&cfg).unwrap();

    let x = arts.series("x_mean").unwrap();
    let ax_plain = arts.series("ax_plain").unwrap();
    let e_field = arts.series("e_field").unwrap();
    let z = arts.series("z_mean").unwrap();
    let h = x.times[1] - x.times[0];

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..x.values.len() - 1 {
        let d2x = (x.values[i + 1] - 2.0 * x.values[i] + x.values[i - 1]) / (h * h);
        let rhs = ax_plain.values[i] - e_field.values[i];
        num += (d2x - rhs) * (d2x - rhs);
        den += rhs * rhs;
    }
    let rel_rms = (num / den).sqrt();
    assert!(rel_rms < 0.02, "Ehrenfest residual {rel_rms}");

    let z_max = z.values.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    assert!(z_max < 1e-6, "dipole-mode <z> leaked to {z_max}");
}
