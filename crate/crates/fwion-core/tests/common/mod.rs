//! Shared oracles for the integration tests. These deliberately avoid the
//! library's propagation machinery: the classical reference integrates
//! Hamilton's equations for the same weakly relativistic Hamiltonian with a
//! plain RK4 scheme.

use fwion_core::pulse::LaserPulse;
use fwion_core::SoftCorePotential;

#[derive(Debug, Clone, Copy)]
pub struct ClassicalState {
    pub x: f64,
    pub z: f64,
    pub px: f64,
    pub pz: f64,
}

pub struct ClassicalOracle<'a> {
    pub pulse: &'a LaserPulse,
    pub potential: Option<&'a SoftCorePotential>,
    pub mass_shift: bool,
    pub c: f64,
}

impl ClassicalOracle<'_> {
    /// dot(state) from H = ((px + A/c)^2 + pz^2)/2 - p^4/8c^2 + V.
    fn derivative(&self, s: ClassicalState, t: f64) -> ClassicalState {
        let f = self.pulse.fields(s.z, t);
        let a_over_c = f.a_x / self.c;
        let p2 = s.px * s.px + s.pz * s.pz;
        let ms = if self.mass_shift {
            p2 / (2.0 * self.c * self.c)
        } else {
            0.0
        };
        let (vx, vz) = match self.potential {
            Some(p) => p.gradient(s.x, s.z),
            None => (0.0, 0.0),
        };
        // dA/dz = E for the retarded argument t - z/c.
        ClassicalState {
            x: s.px + a_over_c - ms * s.px,
            z: s.pz - ms * s.pz,
            px: -vx,
            pz: -(s.px + a_over_c) * f.e_x / self.c - vz,
        }
    }

    /// RK4 trajectory sampled every `sample_every` steps, starting from rest
    /// at the origin unless another start is given.
    pub fn trajectory(
        &self,
        start: ClassicalState,
        t_end: f64,
        dt: f64,
        sample_every: usize,
    ) -> Vec<(f64, ClassicalState)> {
        let n = (t_end / dt).ceil() as usize;
        let mut s = start;
        let mut t = 0.0;
        let mut out = vec![(t, s)];
        for i in 1..=n {
            let k1 = self.derivative(s, t);
            let k2 = self.derivative(advance(s, k1, 0.5 * dt), t + 0.5 * dt);
            let k3 = self.derivative(advance(s, k2, 0.5 * dt), t + 0.5 * dt);
            let k4 = self.derivative(advance(s, k3, dt), t + dt);
            s = ClassicalState {
                x: s.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
                z: s.z + dt / 6.0 * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z),
                px: s.px + dt / 6.0 * (k1.px + 2.0 * k2.px + 2.0 * k3.px + k4.px),
                pz: s.pz + dt / 6.0 * (k1.pz + 2.0 * k2.pz + 2.0 * k3.pz + k4.pz),
            };
            t = i as f64 * dt;
            if i % sample_every == 0 {
                out.push((t, s));
            }
        }
        out
    }
}

fn advance(s: ClassicalState, d: ClassicalState, h: f64) -> ClassicalState {
    ClassicalState {
        x: s.x + h * d.x,
        z: s.z + h * d.z,
        px: s.px + h * d.px,
        pz: s.pz + h * d.pz,
    }
}

/// Linear interpolation of a sampled series at time t.
pub fn interp(series: &[(f64, f64)], t: f64) -> f64 {
    match series.iter().position(|&(ts, _)| ts >= t) {
        None => series.last().unwrap().1,
        Some(0) => series[0].1,
        Some(i) => {
            let (t0, v0) = series[i - 1];
            let (t1, v1) = series[i];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

/// Least-squares slope of y against x.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
