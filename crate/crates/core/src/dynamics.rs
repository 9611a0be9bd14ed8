//! Equations of motion in particle (`x`), light-cone (`z`) and
//! hyperbolic-polar coordinates, and their integration.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::IntegrationFailure;
use crate::ode::{self, IntegratorConfig, Stats};
use crate::rep::{signed_radius, Symmetry, SystemSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coords {
    /// `(x₁, x₂, …, x_{2m})`.
    #[default]
    X,
    /// `(z₁⁺, z₁⁻, …, z_m⁺, z_m⁻)`.
    Z,
    /// `(r₁, θ₁, …, r_m, θ_m)`.
    Polar,
}

/// Positions and velocities at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub coords: Coords,
}

impl PhaseState {
    pub fn new(t: f64, q: Vec<f64>, v: Vec<f64>, coords: Coords) -> Self {
        Self { t, q, v, coords }
    }

    pub fn expect(&self, coords: Coords) -> Result<()> {
        if self.coords != coords {
            return Err(Error::TagMismatch {
                expected: coords,
                got: self.coords,
            });
        }
        Ok(())
    }

    pub fn validate(&self, spec: &SystemSpec) -> Result<()> {
        spec.check_dim(self.q.len())?;
        spec.check_dim(self.v.len())?;
        if self.q.iter().chain(&self.v).any(|v| !v.is_finite()) || !self.t.is_finite() {
            return Err(Error::Domain("state has non-finite entries".into()));
        }
        if self.coords == Coords::Polar {
            for r in self.q.iter().step_by(2) {
                if *r <= 0.0 {
                    return Err(polar_singularity(*r));
                }
            }
        }
        Ok(())
    }
}

fn polar_singularity(r: f64) -> Error {
    Error::CoordinateSingularity(format!(
        "radius {r} is not positive; the polar chart covers only z⁺ > |z⁻|, integrate in z coordinates instead"
    ))
}

/// Values of named invariants at each sample of a trajectory.
#[derive(Debug, Clone, Default, Serialize)]
pub struct InvariantLog {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl InvariantLog {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|row| row[k]).collect())
    }

    /// `max |I(t) − I(t₀)| / max(|I(t₀)|, 1)` for each invariant.
    pub fn drifts(&self) -> Vec<(String, f64)> {
        self.names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let first = self.values.first().map_or(0.0, |r| r[k]);
                let worst = self
                    .values
                    .iter()
                    .map(|r| (r[k] - first).abs())
                    .fold(0.0, f64::max);
                (name.clone(), worst / first.abs().max(1.0))
            })
            .collect()
    }
}

/// Time-ordered samples of one integration.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub coords: Coords,
    pub states: Vec<PhaseState>,
    pub accelerations: Vec<Vec<f64>>,
    pub stats: Stats,
    pub invariants: Option<InvariantLog>,
}

impl Trajectory {
    fn empty(coords: Coords) -> Self {
        Self {
            coords,
            states: Vec::new(),
            accelerations: Vec::new(),
            stats: Stats::default(),
            invariants: None,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.q[k]).collect()
    }

    pub fn last(&self) -> Option<&PhaseState> {
        self.states.last()
    }

    /// Cubic Hermite interpolation between stored samples.
    pub fn interpolate(&self, t: f64) -> Option<PhaseState> {
        let first = self.states.first()?;
        let last = self.states.last()?;
        if t < first.t || t > last.t {
            return None;
        }
        let idx = self.states.partition_point(|s| s.t <= t);
        if idx == self.states.len() {
            return Some(last.clone());
        }
        let (a, b) = (&self.states[idx - 1], &self.states[idx]);
        let (aa, ab) = (&self.accelerations[idx - 1], &self.accelerations[idx]);
        let q = (0..a.q.len())
            .map(|k| ode::hermite(a.t, b.t, a.q[k], b.q[k], a.v[k], b.v[k], t))
            .collect();
        let v = (0..a.v.len())
            .map(|k| ode::hermite(a.t, b.t, a.v[k], b.v[k], aa[k], ab[k], t))
            .collect();
        Some(PhaseState {
            t,
            q,
            v,
            coords: self.coords,
        })
    }

    pub fn column_names(&self) -> Vec<String> {
        let n = self.states.first().map_or(0, |s| s.q.len());
        let mut q: Vec<String> = Vec::with_capacity(n);
        for i in 0..n / 2 {
            let names = match self.coords {
                Coords::X => [format!("x{}", 2 * i + 1), format!("x{}", 2 * i + 2)],
                Coords::Z => [format!("zp{}", i + 1), format!("zm{}", i + 1)],
                Coords::Polar => [format!("r{}", i + 1), format!("theta{}", i + 1)],
            };
            q.extend(names);
        }
        let v: Vec<String> = q.iter().map(|c| format!("d{c}")).collect();
        let mut cols = vec!["t".to_string()];
        cols.extend(q);
        cols.extend(v);
        if let Some(log) = &self.invariants {
            cols.extend(log.names.iter().cloned());
        }
        cols
    }

    /// CSV with columns `t`, positions, velocities, then logged invariants.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.column_names())?;
        for (k, s) in self.states.iter().enumerate() {
            let mut row: Vec<String> = Vec::with_capacity(1 + 2 * s.q.len());
            row.push(s.t.to_string());
            row.extend(s.q.iter().chain(&s.v).map(f64::to_string));
            if let Some(log) = &self.invariants {
                row.extend(log.values[k].iter().map(f64::to_string));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Particle-frame accelerations
/// `ẍ_{2i−1} = γQᵢẋ_{2i−1} − 2∂V/∂x_{2i}`, `ẍ_{2i} = −γQᵢẋ_{2i} − 2∂V/∂x_{2i−1}`.
pub fn eom_x(spec: &SystemSpec, state: &PhaseState) -> Result<Vec<f64>> {
    state.expect(Coords::X)?;
    spec.check_dim(state.q.len())?;
    let mut out = vec![0.0; spec.dim()];
    accel_x(spec, &state.q, &state.v, &mut out)?;
    Ok(out)
}

fn accel_x(spec: &SystemSpec, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
    spec.potential.gradient(x, out)?;
    let g = spec.gamma;
    for (i, prof) in spec.profiles.iter().enumerate() {
        let (o, e) = (2 * i, 2 * i + 1);
        let q = prof.trace(x[o], x[e])?;
        let (dvo, dve) = (out[o], out[e]);
        out[o] = g * q * v[o] - 2.0 * dve;
        out[e] = -g * q * v[e] - 2.0 * dvo;
    }
    Ok(())
}

/// Light-cone accelerations
/// `z̈⁺ = γQż⁻ − 2∂V/∂z⁺`, `z̈⁻ = γQż⁺ + 2∂V/∂z⁻`.
pub fn eom_z(spec: &SystemSpec, state: &PhaseState) -> Result<Vec<f64>> {
    state.expect(Coords::Z)?;
    spec.check_dim(state.q.len())?;
    let mut out = vec![0.0; spec.dim()];
    accel_z(spec, &state.q, &state.v, &mut out)?;
    Ok(out)
}

fn accel_z(spec: &SystemSpec, z: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
    crate::rep::potential_gradient_z(spec.potential.as_ref(), z, out)?;
    let g = spec.gamma;
    for (i, prof) in spec.profiles.iter().enumerate() {
        let (p, m) = (2 * i, 2 * i + 1);
        let q = prof.trace_z(z[p], z[m])?;
        let (dvp, dvm) = (out[p], out[m]);
        out[p] = g * q * v[m] - 2.0 * dvp;
        out[m] = g * q * v[p] + 2.0 * dvm;
    }
    Ok(())
}

fn radial_gains(spec: &SystemSpec) -> Result<&[crate::rep::RadialGain]> {
    match &spec.symmetry {
        Symmetry::Rotational { gains } => Ok(gains),
        other => Err(Error::Spec(format!(
            "polar coordinates need a rotational system, got {}",
            other.label()
        ))),
    }
}

/// Polar accelerations `(r̈ᵢ, θ̈ᵢ)` with `P_θ` eliminated through the velocities.
pub fn eom_polar(spec: &SystemSpec, state: &PhaseState) -> Result<Vec<f64>> {
    state.expect(Coords::Polar)?;
    spec.check_dim(state.q.len())?;
    let mut out = vec![0.0; spec.dim()];
    accel_polar(spec, &state.q, &state.v, &mut out)?;
    Ok(out)
}

fn accel_polar(spec: &SystemSpec, q: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
    let gains = radial_gains(spec)?;
    let x = polar_to_x_coords(q);
    for r in q.iter().step_by(2) {
        if !(*r > 0.0) {
            return Err(polar_singularity(*r));
        }
    }
    let mut dv = vec![0.0; x.len()];
    spec.potential.gradient(&x, &mut dv)?;
    let gam = spec.gamma;
    for (i, gain) in gains.iter().enumerate() {
        let (ir, it) = (2 * i, 2 * i + 1);
        let (r, rdot, thdot) = (q[ir], v[ir], v[it]);
        let g = gain.g(r);
        let dg = gain.dg(r);
        let p_theta = -0.5 * (r * r * thdot - gam * r * r * g);
        let dv_dr = (dv[ir] * x[ir] + dv[it] * x[it]) / r;
        out[ir] = -4.0 * p_theta * p_theta / r.powi(3) + gam * gam * r * g * g
            - gam * (2.0 * p_theta - gam * r * r * g) * dg
            - 2.0 * dv_dr;
        out[it] = gam * dg * rdot + 4.0 * p_theta * rdot / r.powi(3);
    }
    Ok(())
}

/// Accelerations in whichever chart the state is tagged with.
pub fn acceleration(spec: &SystemSpec, state: &PhaseState) -> Result<Vec<f64>> {
    match state.coords {
        Coords::X => eom_x(spec, state),
        Coords::Z => eom_z(spec, state),
        Coords::Polar => eom_polar(spec, state),
    }
}

pub fn polar_to_x_coords(q: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(q.len());
    for c in q.chunks_exact(2) {
        let (r, th) = (c[0], c[1]);
        x.push(r * std::f64::consts::FRAC_1_SQRT_2 * th.exp());
        x.push(r * std::f64::consts::FRAC_1_SQRT_2 * (-th).exp());
    }
    x
}

/// Light-cone state to polar state; requires `z⁺ > |z⁻|` for every pair.
pub fn z_to_polar(state: &PhaseState) -> Result<PhaseState> {
    state.expect(Coords::Z)?;
    let mut q = Vec::with_capacity(state.q.len());
    let mut v = Vec::with_capacity(state.q.len());
    for (c, d) in state.q.chunks_exact(2).zip(state.v.chunks_exact(2)) {
        let (zp, zm, vp, vm) = (c[0], c[1], d[0], d[1]);
        if !(zp > zm.abs()) {
            return Err(polar_singularity(signed_radius(zp, zm)));
        }
        let r = ((zp - zm) * (zp + zm)).sqrt();
        let th = (zm / zp).atanh();
        q.extend([r, th]);
        v.extend([(zp * vp - zm * vm) / r, (zp * vm - zm * vp) / (r * r)]);
    }
    Ok(PhaseState {
        t: state.t,
        q,
        v,
        coords: Coords::Polar,
    })
}

pub fn polar_to_z(state: &PhaseState) -> Result<PhaseState> {
    state.expect(Coords::Polar)?;
    let mut q = Vec::with_capacity(state.q.len());
    let mut v = Vec::with_capacity(state.q.len());
    for (c, d) in state.q.chunks_exact(2).zip(state.v.chunks_exact(2)) {
        let (r, th, rd, thd) = (c[0], c[1], d[0], d[1]);
        let (ch, sh) = (th.cosh(), th.sinh());
        q.extend([r * ch, r * sh]);
        v.extend([rd * ch + r * sh * thd, rd * sh + r * ch * thd]);
    }
    Ok(PhaseState {
        t: state.t,
        q,
        v,
        coords: Coords::Z,
    })
}

/// Any state mapped into the particle frame.
pub fn to_x(state: &PhaseState) -> Result<PhaseState> {
    match state.coords {
        Coords::X => Ok(state.clone()),
        Coords::Z => crate::rep::z_to_x(state),
        Coords::Polar => crate::rep::z_to_x(&polar_to_z(state)?),
    }
}

/// Any state mapped into the light-cone frame.
pub fn to_z(state: &PhaseState) -> Result<PhaseState> {
    match state.coords {
        Coords::X => crate::rep::x_to_z(state),
        Coords::Z => Ok(state.clone()),
        Coords::Polar => polar_to_z(state),
    }
}

/// Canonical momenta of a tagged state.
pub fn momenta_from_velocities(spec: &SystemSpec, state: &PhaseState) -> Result<Vec<f64>> {
    spec.check_dim(state.q.len())?;
    spec.check_dim(state.v.len())?;
    let g = spec.gamma;
    let mut p = vec![0.0; state.q.len()];
    match state.coords {
        Coords::X => {
            let f = spec.gains(&state.q)?;
            for i in 0..spec.pairs() {
                let (o, e) = (2 * i, 2 * i + 1);
                p[o] = 0.5 * (state.v[e] + g * f[e]);
                p[e] = 0.5 * (state.v[o] - g * f[o]);
            }
        }
        Coords::Z => {
            let f = spec.gains_z(&state.q)?;
            for i in 0..spec.pairs() {
                let (a, b) = (2 * i, 2 * i + 1);
                p[a] = 0.5 * (state.v[a] - g * f[b]);
                p[b] = -0.5 * (state.v[b] - g * f[a]);
            }
        }
        Coords::Polar => {
            let gains = radial_gains(spec)?;
            for (i, gain) in gains.iter().enumerate() {
                let (a, b) = (2 * i, 2 * i + 1);
                let r = state.q[a];
                p[a] = 0.5 * state.v[a];
                p[b] = -0.5 * (r * r * state.v[b] - g * r * r * gain.g(r));
            }
        }
    }
    Ok(p)
}

/// Inverse of [`momenta_from_velocities`].
pub fn velocities_from_momenta(
    spec: &SystemSpec,
    t: f64,
    q: &[f64],
    p: &[f64],
    coords: Coords,
) -> Result<PhaseState> {
    spec.check_dim(q.len())?;
    spec.check_dim(p.len())?;
    let g = spec.gamma;
    let mut v = vec![0.0; q.len()];
    match coords {
        Coords::X => {
            let f = spec.gains(q)?;
            for i in 0..spec.pairs() {
                let (o, e) = (2 * i, 2 * i + 1);
                v[e] = 2.0 * p[o] - g * f[e];
                v[o] = 2.0 * p[e] + g * f[o];
            }
        }
        Coords::Z => {
            let f = spec.gains_z(q)?;
            for i in 0..spec.pairs() {
                let (a, b) = (2 * i, 2 * i + 1);
                v[a] = 2.0 * p[a] + g * f[b];
                v[b] = g * f[a] - 2.0 * p[b];
            }
        }
        Coords::Polar => {
            let gains = radial_gains(spec)?;
            for (i, gain) in gains.iter().enumerate() {
                let (a, b) = (2 * i, 2 * i + 1);
                let r = q[a];
                if !(r > 0.0) {
                    return Err(polar_singularity(r));
                }
                v[a] = 2.0 * p[a];
                v[b] = g * gain.g(r) - 2.0 * p[b] / (r * r);
            }
        }
    }
    Ok(PhaseState {
        t,
        q: q.to_vec(),
        v,
        coords,
    })
}

/// Integrates the equations of motion from `initial` to `t_end`.
pub fn integrate(
    spec: &SystemSpec,
    initial: &PhaseState,
    cfg: &IntegratorConfig,
    t_end: f64,
) -> Result<Trajectory> {
    initial.validate(spec)?;
    cfg.validate()?;
    if !(t_end > initial.t) {
        return Err(Error::Config(format!(
            "end time {t_end} must exceed start time {}",
            initial.t
        )));
    }
    let coords = initial.coords;
    let rhs = |q: &[f64], v: &[f64], a: &mut [f64]| match coords {
        Coords::X => accel_x(spec, q, v, a),
        Coords::Z => accel_z(spec, q, v, a),
        Coords::Polar => accel_polar(spec, q, v, a),
    };
    integrate_with(rhs, initial, cfg, t_end)
}

/// Integrates `q̈ = a(q, q̇)` supplied as a closure.
pub fn integrate_with<A>(
    mut accel: A,
    initial: &PhaseState,
    cfg: &IntegratorConfig,
    t_end: f64,
) -> Result<Trajectory>
where
    A: FnMut(&[f64], &[f64], &mut [f64]) -> Result<()>,
{
    let n = initial.q.len();
    let mut y0 = initial.q.clone();
    y0.extend_from_slice(&initial.v);
    let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[..n].copy_from_slice(&y[n..]);
        let (q, v) = y.split_at(n);
        accel(q, v, &mut dy[n..])
    };
    let mut traj = Trajectory::empty(initial.coords);
    let (stats, halt) = ode::solve(f, initial.t, &y0, t_end, cfg, |t, y, dy| {
        traj.states.push(PhaseState {
            t,
            q: y[..n].to_vec(),
            v: y[n..].to_vec(),
            coords: initial.coords,
        });
        traj.accelerations.push(dy[n..].to_vec());
    });
    traj.stats = stats;
    match halt {
        None => Ok(traj),
        Some(h) => Err(Error::Integration(Box::new(IntegrationFailure {
            kind: h.kind,
            t: h.t,
            message: h.message,
            partial: traj,
        }))),
    }
}
