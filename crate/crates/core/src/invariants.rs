//! Conserved charges, Poisson brackets in the canonical light-cone chart
//! `(z, P_z)`, and gauge-equivalence checks of the Lagrangian description.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    self, momenta_from_velocities, Coords, InvariantLog, PhaseState, Trajectory,
};
use crate::ode::IntegratorConfig;
use crate::poly::Polynomial;
use crate::rep::{fd_step, signed_radius, Direction, Jac2, RadialGain, Symmetry, SystemSpec};
use crate::{Error, Result};

/// Charges of a state; only those allowed by the symmetry tag are filled.
#[derive(Debug, Clone, Serialize)]
pub struct ChargeSet {
    pub t: f64,
    pub energy: f64,
    pub translational: Option<Vec<f64>>,
    pub rotational: Option<Vec<f64>>,
}

fn z_state(state: &PhaseState) -> Result<PhaseState> {
    dynamics::to_z(state)
}

/// Energy from the particle-frame form
/// `Σ[2P₁P₂ + γ(F₁P₁ − F₂P₂) − (γ²/2)F₁F₂] + V`.
pub fn energy_x_form(spec: &SystemSpec, state: &PhaseState) -> Result<f64> {
    let s = dynamics::to_x(state)?;
    let p = momenta_from_velocities(spec, &s)?;
    let f = spec.gains(&s.q)?;
    let g = spec.gamma;
    let mut h = spec.potential.value(&s.q)?;
    for i in 0..spec.pairs() {
        let (o, e) = (2 * i, 2 * i + 1);
        h += 2.0 * p[o] * p[e] + g * (f[o] * p[o] - f[e] * p[e]) - 0.5 * g * g * f[o] * f[e];
    }
    Ok(h)
}

/// Energy from the light-cone form `Σ[(P⁺ + γF⁻/2)² − (P⁻ − γF⁺/2)²] + V`.
pub fn energy_z_form(spec: &SystemSpec, state: &PhaseState) -> Result<f64> {
    let s = z_state(state)?;
    let p = momenta_from_velocities(spec, &s)?;
    hamiltonian(spec, &s.q, &p)
}

/// `H`, evaluated in whichever form matches the state's chart.
pub fn energy(spec: &SystemSpec, state: &PhaseState) -> Result<f64> {
    match state.coords {
        Coords::X => energy_x_form(spec, state),
        Coords::Z | Coords::Polar => energy_z_form(spec, state),
    }
}

/// `H(z, P)` in the canonical light-cone chart.
pub fn hamiltonian(spec: &SystemSpec, z: &[f64], p: &[f64]) -> Result<f64> {
    let f = spec.gains_z(z)?;
    let g = spec.gamma;
    let x = crate::rep::z_to_x_coords(z);
    let mut h = spec.potential.value(&x)?;
    for i in 0..spec.pairs() {
        let (a, b) = (2 * i, 2 * i + 1);
        let u = p[a] + 0.5 * g * f[b];
        let w = p[b] - 0.5 * g * f[a];
        h += u * u - w * w;
    }
    Ok(h)
}

/// `Πᵢ = 2P⁺ᵢ + γ(Fᵢ⁻ − fᵢ(zᵢ⁻))`, or `Πᵢ⁻ = −2P⁻ᵢ + γ(Fᵢ⁺ − fᵢ(zᵢ⁺))` for
/// the exchanged direction.
pub fn translational_charges(spec: &SystemSpec, state: &PhaseState) -> Result<Vec<f64>> {
    let (direction, fs) = translational_tag(spec)?;
    let s = z_state(state)?;
    let p = momenta_from_velocities(spec, &s)?;
    let f = spec.gains_z(&s.q)?;
    let g = spec.gamma;
    Ok(fs
        .iter()
        .enumerate()
        .map(|(i, fi)| {
            let (a, b) = (2 * i, 2 * i + 1);
            match direction {
                Direction::CyclicPlus => 2.0 * p[a] + g * (f[b] - fi.eval(s.q[b])),
                Direction::CyclicMinus => -2.0 * p[b] + g * (f[a] - fi.eval(s.q[a])),
            }
        })
        .collect())
}

fn translational_tag(spec: &SystemSpec) -> Result<(Direction, &[Polynomial])> {
    match &spec.symmetry {
        Symmetry::Translational {
            direction,
            antiderivatives,
        } => Ok((*direction, antiderivatives)),
        other => Err(Error::Spec(format!(
            "translational charges need a translational system, got {}",
            other.label()
        ))),
    }
}

fn rotational_tag(spec: &SystemSpec) -> Result<&[RadialGain]> {
    match &spec.symmetry {
        Symmetry::Rotational { gains } => Ok(gains),
        other => Err(Error::Spec(format!(
            "rotational charges need a rotational system, got {}",
            other.label()
        ))),
    }
}

/// `Lᵢ = zᵢ⁻żᵢ⁺ − zᵢ⁺żᵢ⁻ + γ(zᵢ⁺² − zᵢ⁻²)g(ρᵢ)`.
pub fn rotational_charges(spec: &SystemSpec, state: &PhaseState) -> Result<Vec<f64>> {
    let gains = rotational_tag(spec)?;
    let s = z_state(state)?;
    Ok(gains
        .iter()
        .enumerate()
        .map(|(i, gain)| {
            let (zp, zm) = (s.q[2 * i], s.q[2 * i + 1]);
            let (vp, vm) = (s.v[2 * i], s.v[2 * i + 1]);
            zm * vp - zp * vm + spec.gamma * (zp - zm) * (zp + zm) * gain.g(signed_radius(zp, zm))
        })
        .collect())
}

pub fn charges(spec: &SystemSpec, state: &PhaseState) -> Result<ChargeSet> {
    let energy = energy(spec, state)?;
    let (translational, rotational) = match spec.symmetry {
        Symmetry::None => (None, None),
        Symmetry::Translational { .. } => (Some(translational_charges(spec, state)?), None),
        Symmetry::Rotational { .. } => (None, Some(rotational_charges(spec, state)?)),
    };
    Ok(ChargeSet {
        t: state.t,
        energy,
        translational,
        rotational,
    })
}

/// Names of the logged invariants, `H` first.
pub fn invariant_names(spec: &SystemSpec) -> Vec<String> {
    let mut names = vec!["H".to_string()];
    let m = spec.pairs();
    match &spec.symmetry {
        Symmetry::None => {}
        Symmetry::Translational {
            direction: Direction::CyclicPlus,
            ..
        } => names.extend((1..=m).map(|i| format!("Pi{i}"))),
        Symmetry::Translational {
            direction: Direction::CyclicMinus,
            ..
        } => names.extend((1..=m).map(|i| format!("PiMinus{i}"))),
        Symmetry::Rotational { .. } => names.extend((1..=m).map(|i| format!("L{i}"))),
    }
    names
}

/// Evaluates `H` and the applicable charges at every sample.
pub fn log_invariants(spec: &SystemSpec, traj: &mut Trajectory) -> Result<()> {
    let names = invariant_names(spec);
    let values = traj
        .states
        .iter()
        .map(|s| {
            let c = charges(spec, s)?;
            let mut row = vec![c.energy];
            row.extend(c.translational.into_iter().flatten());
            row.extend(c.rotational.into_iter().flatten());
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    traj.invariants = Some(InvariantLog { names, values });
    Ok(())
}

/// A function on the canonical light-cone phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum PhaseFunction {
    Energy,
    /// `Πᵢ` or `Πᵢ⁻`, following the system's direction.
    Translational(usize),
    /// `P_θᵢ = Lᵢ/2 = zᵢ⁻P⁺ᵢ + zᵢ⁺P⁻ᵢ`.
    Angular(usize),
    Coordinate(usize),
    Momentum(usize),
    /// `H` through its value only, forcing finite-difference gradients.
    EnergyValueOnly,
}

impl PhaseFunction {
    pub fn label(&self) -> String {
        match self {
            PhaseFunction::Energy | PhaseFunction::EnergyValueOnly => "H".into(),
            PhaseFunction::Translational(i) => format!("Pi{}", i + 1),
            PhaseFunction::Angular(i) => format!("Ptheta{}", i + 1),
            PhaseFunction::Coordinate(k) => format!("z[{k}]"),
            PhaseFunction::Momentum(k) => format!("P[{k}]"),
        }
    }

    pub fn value(&self, spec: &SystemSpec, z: &[f64], p: &[f64]) -> Result<f64> {
        spec.check_dim(z.len())?;
        spec.check_dim(p.len())?;
        match *self {
            PhaseFunction::Energy | PhaseFunction::EnergyValueOnly => hamiltonian(spec, z, p),
            PhaseFunction::Translational(i) => {
                let (direction, fs) = translational_tag(spec)?;
                let (a, b) = (2 * i, 2 * i + 1);
                let [fp, fm] = spec.profiles[i].value_z(z[a], z[b])?;
                Ok(match direction {
                    Direction::CyclicPlus => 2.0 * p[a] + spec.gamma * (fm - fs[i].eval(z[b])),
                    Direction::CyclicMinus => -2.0 * p[b] + spec.gamma * (fp - fs[i].eval(z[a])),
                })
            }
            PhaseFunction::Angular(i) => Ok(z[2 * i + 1] * p[2 * i] + z[2 * i] * p[2 * i + 1]),
            PhaseFunction::Coordinate(k) => Ok(z[k]),
            PhaseFunction::Momentum(k) => Ok(p[k]),
        }
    }

    /// Analytic `(∂/∂z, ∂/∂P)`, or `None` when only values are available.
    pub fn gradient(
        &self,
        spec: &SystemSpec,
        z: &[f64],
        p: &[f64],
    ) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let n = spec.dim();
        let mut gz = vec![0.0; n];
        let mut gp = vec![0.0; n];
        let g = spec.gamma;
        match *self {
            PhaseFunction::EnergyValueOnly => return Ok(None),
            PhaseFunction::Energy => {
                crate::rep::potential_gradient_z(spec.potential.as_ref(), z, &mut gz)?;
                for (i, prof) in spec.profiles.iter().enumerate() {
                    let (a, b) = (2 * i, 2 * i + 1);
                    let [fp, fm] = prof.value_z(z[a], z[b])?;
                    let j = prof.jacobian_z(z[a], z[b])?;
                    let u = p[a] + 0.5 * g * fm;
                    let w = p[b] - 0.5 * g * fp;
                    gp[a] = 2.0 * u;
                    gp[b] = -2.0 * w;
                    gz[a] += g * (u * j[1][0] + w * j[0][0]);
                    gz[b] += g * (u * j[1][1] + w * j[0][1]);
                }
            }
            PhaseFunction::Translational(i) => {
                let (direction, fs) = translational_tag(spec)?;
                let (a, b) = (2 * i, 2 * i + 1);
                let j: Jac2 = spec.profiles[i].jacobian_z(z[a], z[b])?;
                match direction {
                    Direction::CyclicPlus => {
                        gp[a] = 2.0;
                        gz[a] = g * j[1][0];
                        gz[b] = g * (j[1][1] - fs[i].derivative().eval(z[b]));
                    }
                    Direction::CyclicMinus => {
                        gp[b] = -2.0;
                        gz[a] = g * (j[0][0] - fs[i].derivative().eval(z[a]));
                        gz[b] = g * j[0][1];
                    }
                }
            }
            PhaseFunction::Angular(i) => {
                let (a, b) = (2 * i, 2 * i + 1);
                gz[a] = p[b];
                gz[b] = p[a];
                gp[a] = z[b];
                gp[b] = z[a];
            }
            PhaseFunction::Coordinate(k) => gz[k] = 1.0,
            PhaseFunction::Momentum(k) => gp[k] = 1.0,
        }
        Ok(Some((gz, gp)))
    }

    fn fd_gradient(&self, spec: &SystemSpec, z: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = z.len();
        let mut zz = z.to_vec();
        let mut pp = p.to_vec();
        let mut gz = vec![0.0; n];
        let mut gp = vec![0.0; n];
        for k in 0..n {
            let h = fd_step(z[k]);
            zz[k] = z[k] + h;
            let fp = self.value(spec, &zz, p)?;
            zz[k] = z[k] - h;
            let fm = self.value(spec, &zz, p)?;
            zz[k] = z[k];
            gz[k] = (fp - fm) / (2.0 * h);
            let h = fd_step(p[k]);
            pp[k] = p[k] + h;
            let fp = self.value(spec, z, &pp)?;
            pp[k] = p[k] - h;
            let fm = self.value(spec, z, &pp)?;
            pp[k] = p[k];
            gp[k] = (fp - fm) / (2.0 * h);
        }
        Ok((gz, gp))
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Bracket {
    pub value: f64,
    /// Bracket from central-difference gradients, when requested.
    pub finite_difference: Option<f64>,
    /// Set when an analytic gradient was unavailable.
    pub used_finite_differences: bool,
}

fn contract(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    a.0.iter().zip(&b.1).map(|(x, y)| x * y).sum::<f64>()
        - a.1.iter().zip(&b.0).map(|(x, y)| x * y).sum::<f64>()
}

/// `{A, B} = Σ ∂A/∂z ∂B/∂P − ∂A/∂P ∂B/∂z`.
pub fn poisson_bracket(
    spec: &SystemSpec,
    fa: PhaseFunction,
    fb: PhaseFunction,
    z: &[f64],
    p: &[f64],
    cross_check: bool,
) -> Result<Bracket> {
    let ga = fa.gradient(spec, z, p)?;
    let gb = fb.gradient(spec, z, p)?;
    let used_fd = ga.is_none() || gb.is_none();
    let fda = if used_fd || cross_check {
        Some(fa.fd_gradient(spec, z, p)?)
    } else {
        None
    };
    let fdb = if used_fd || cross_check {
        Some(fb.fd_gradient(spec, z, p)?)
    } else {
        None
    };
    let fd_value = match (&fda, &fdb) {
        (Some(a), Some(b)) => Some(contract(a, b)),
        _ => None,
    };
    let ga = ga
        .or(fda.clone())
        .expect("finite-difference gradient present");
    let gb = gb
        .or(fdb.clone())
        .expect("finite-difference gradient present");
    Ok(Bracket {
        value: contract(&ga, &gb),
        finite_difference: fd_value,
        used_finite_differences: used_fd,
    })
}

/// `H` followed by the charges implied by the symmetry tag.
pub fn charge_functions(spec: &SystemSpec) -> Vec<PhaseFunction> {
    let mut fs = vec![PhaseFunction::Energy];
    match spec.symmetry {
        Symmetry::None => {}
        Symmetry::Translational { .. } => {
            fs.extend((0..spec.pairs()).map(PhaseFunction::Translational))
        }
        Symmetry::Rotational { .. } => fs.extend((0..spec.pairs()).map(PhaseFunction::Angular)),
    }
    fs
}

/// Random canonical phase point; rotational systems are sampled inside the
/// timelike region `z⁺ > |z⁻|`.
pub fn sample_phase_point(spec: &SystemSpec, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = spec.dim();
    let mut z = Vec::with_capacity(n);
    for _ in 0..spec.pairs() {
        match spec.symmetry {
            Symmetry::Rotational { .. } => {
                let zp: f64 = rng.gen_range(0.5..2.0);
                z.extend([zp, zp * rng.gen_range(-0.8..0.8)]);
            }
            _ => z.extend([rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]),
        }
    }
    let p = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (z, p)
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketStat {
    pub a: String,
    pub b: String,
    pub max_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvolutionReport {
    pub model: String,
    pub symmetry: String,
    pub pairs: usize,
    pub samples: usize,
    pub seed: u64,
    /// `H` plus the symmetry charges.
    pub charge_count: usize,
    pub brackets: Vec<BracketStat>,
    pub max_abs: f64,
    /// Largest gap between analytic and finite-difference brackets.
    pub fd_max_deviation: f64,
    pub tolerance: f64,
    pub fd_tolerance: f64,
    pub pass: bool,
    pub verdict: String,
}

pub const INVOLUTION_TOLERANCE: f64 = 1e-10;
pub const FD_BRACKET_TOLERANCE: f64 = 1e-6;

/// All pairwise brackets among `H` and the charges at `samples` random points.
pub fn involution_suite(spec: &SystemSpec, samples: usize, seed: u64) -> Result<InvolutionReport> {
    let fs = charge_functions(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(Vec<f64>, Vec<f64>)> = (0..samples)
        .map(|_| sample_phase_point(spec, &mut rng))
        .collect();
    let mut combos = Vec::new();
    for i in 0..fs.len() {
        for j in i + 1..fs.len() {
            combos.push((fs[i], fs[j]));
        }
    }
    let per_point: Vec<Vec<(f64, f64)>> = points
        .par_iter()
        .map(|(z, p)| {
            combos
                .iter()
                .map(|(a, b)| {
                    let br = poisson_bracket(spec, *a, *b, z, p, true)?;
                    let fd = br.finite_difference.map_or(0.0, |v| (v - br.value).abs());
                    Ok((br.value.abs(), fd))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut brackets: Vec<BracketStat> = combos
        .iter()
        .map(|(a, b)| BracketStat {
            a: a.label(),
            b: b.label(),
            max_abs: 0.0,
        })
        .collect();
    let mut fd_max: f64 = 0.0;
    for row in &per_point {
        for (k, (v, fd)) in row.iter().enumerate() {
            brackets[k].max_abs = brackets[k].max_abs.max(*v);
            fd_max = fd_max.max(*fd);
        }
    }
    let max_abs = brackets.iter().map(|b| b.max_abs).fold(0.0, f64::max);
    let pass = max_abs < INVOLUTION_TOLERANCE && fd_max < FD_BRACKET_TOLERANCE;
    let m = spec.pairs();
    let verdict = if fs.len() == 1 {
        "no symmetry charges: only H is conserved".to_string()
    } else if !pass {
        format!("involution violated: max |{{·,·}}| = {max_abs:e}")
    } else if m == 1 {
        "completely integrable (N=2): H and one charge in involution".to_string()
    } else {
        format!(
            "partially integrable (N={}): {} integrals of motion in involution",
            2 * m,
            m + 1
        )
    };
    Ok(InvolutionReport {
        model: spec.name.clone(),
        symmetry: spec.symmetry.label().into(),
        pairs: m,
        samples,
        seed,
        charge_count: fs.len(),
        brackets,
        max_abs,
        fd_max_deviation: fd_max,
        tolerance: INVOLUTION_TOLERANCE,
        fd_tolerance: FD_BRACKET_TOLERANCE,
        pass,
        verdict,
    })
}

/// Vector potential entering `L = Σ(ż⁺² − ż⁻²)/4 + (γ/2)Σ(A⁺ż⁻ − A⁻ż⁺) − V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// `A = (F⁺, F⁻)`.
    Original,
    /// All of the field along the non-cyclic coordinate: `(0, f(z⁻))`, or
    /// `(f(z⁺), 0)` when `z⁻` is cyclic.
    First,
    /// All of the field along the cyclic coordinate: `(z⁺f'(z⁻), 0)`, or
    /// `(0, z⁻f'(z⁺))` when `z⁻` is cyclic.
    Second,
}

fn gauge_jacobian(spec: &SystemSpec, gauge: Gauge, i: usize, zp: f64, zm: f64) -> Result<Jac2> {
    if gauge == Gauge::Original {
        return spec.profiles[i].jacobian_z(zp, zm);
    }
    let (direction, fs) = translational_tag(spec)?;
    let df = fs[i].derivative();
    let ddf = df.derivative();
    Ok(match (direction, gauge) {
        (Direction::CyclicPlus, Gauge::First) => [[0.0, 0.0], [0.0, df.eval(zm)]],
        (Direction::CyclicPlus, _) => [[df.eval(zm), zp * ddf.eval(zm)], [0.0, 0.0]],
        (Direction::CyclicMinus, Gauge::First) => [[df.eval(zp), 0.0], [0.0, 0.0]],
        (Direction::CyclicMinus, _) => [[0.0, 0.0], [zm * ddf.eval(zp), df.eval(zp)]],
    })
}

/// Euler-Lagrange accelerations of the light-cone Lagrangian in `gauge`,
/// keeping every vector-potential term rather than only the field strength.
pub fn euler_lagrange_z(
    spec: &SystemSpec,
    gauge: Gauge,
    z: &[f64],
    v: &[f64],
    out: &mut [f64],
) -> Result<()> {
    crate::rep::potential_gradient_z(spec.potential.as_ref(), z, out)?;
    let g = spec.gamma;
    for i in 0..spec.pairs() {
        let (a, b) = (2 * i, 2 * i + 1);
        let j = gauge_jacobian(spec, gauge, i, z[a], z[b])?;
        let (ap_p, ap_m, am_p, am_m) = (j[0][0], j[0][1], j[1][0], j[1][1]);
        let (vp, vm) = (v[a], v[b]);
        let (dvp, dvm) = (out[a], out[b]);
        out[a] = g * (ap_p * vm - am_p * vp) + g * (am_p * vp + am_m * vm) - 2.0 * dvp;
        out[b] = g * (ap_p * vp + ap_m * vm) - g * (ap_m * vm - am_m * vp) + 2.0 * dvm;
    }
    Ok(())
}

/// Reduced dynamics of the non-cyclic coordinates once the cyclic momenta
/// are fixed to the charges `c`.
pub fn routhian_accel(spec: &SystemSpec, c: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
    let (direction, fs) = translational_tag(spec)?;
    let m = spec.pairs();
    let mut z = vec![0.0; 2 * m];
    for i in 0..m {
        match direction {
            Direction::CyclicPlus => z[2 * i + 1] = w[i],
            Direction::CyclicMinus => z[2 * i] = w[i],
        }
    }
    let mut gv = vec![0.0; 2 * m];
    crate::rep::potential_gradient_z(spec.potential.as_ref(), &z, &mut gv)?;
    let g = spec.gamma;
    for i in 0..m {
        let q = spec.profiles[i].trace_z(z[2 * i], z[2 * i + 1])?;
        let drive = g * q * (c[i] + g * fs[i].eval(w[i]));
        out[i] = match direction {
            Direction::CyclicPlus => drive + 2.0 * gv[2 * i + 1],
            Direction::CyclicMinus => drive - 2.0 * gv[2 * i],
        };
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GaugeReport {
    pub model: String,
    pub t_end: f64,
    pub samples: usize,
    /// Max deviation of the first-gauge trajectory from the original one.
    pub first_gauge_deviation: f64,
    pub second_gauge_deviation: f64,
    /// Max deviation of the reduced coordinates from the full integration.
    pub routhian_deviation: f64,
    /// At `γ = 0`, whether the three gauge accelerations coincide bit for bit.
    pub identical_without_gain: Option<bool>,
    pub tolerance: f64,
    pub pass: bool,
}

pub const GAUGE_TOLERANCE: f64 = 1e-8;

fn max_state_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .flat_map(|(x, y)| x.q.iter().zip(&y.q).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Integrates the original and both alternative gauges from the same
/// light-cone initial state, plus the reduced dynamics.
pub fn gauge_equivalence(
    spec: &SystemSpec,
    initial: &PhaseState,
    cfg: &IntegratorConfig,
    t_end: f64,
) -> Result<GaugeReport> {
    let (direction, _) = translational_tag(spec)?;
    let init = z_state(initial)?;
    init.validate(spec)?;
    let run = |gauge: Gauge| {
        dynamics::integrate_with(
            |q, v, a| euler_lagrange_z(spec, gauge, q, v, a),
            &init,
            cfg,
            t_end,
        )
    };
    let base = run(Gauge::Original)?;
    let first = run(Gauge::First)?;
    let second = run(Gauge::Second)?;

    let c = translational_charges(spec, &init)?;
    let m = spec.pairs();
    let pick = |s: &PhaseState, k: usize| match direction {
        Direction::CyclicPlus => s.q[2 * k + 1],
        Direction::CyclicMinus => s.q[2 * k],
    };
    let pick_v = |s: &PhaseState, k: usize| match direction {
        Direction::CyclicPlus => s.v[2 * k + 1],
        Direction::CyclicMinus => s.v[2 * k],
    };
    let reduced_init = PhaseState::new(
        init.t,
        (0..m).map(|k| pick(&init, k)).collect(),
        (0..m).map(|k| pick_v(&init, k)).collect(),
        Coords::Z,
    );
    let reduced = dynamics::integrate_with(
        |w, _, a| routhian_accel(spec, &c, w, a),
        &reduced_init,
        cfg,
        t_end,
    )?;
    let routhian_deviation = base
        .states
        .iter()
        .zip(&reduced.states)
        .flat_map(|(full, red)| (0..m).map(move |k| (pick(full, k) - red.q[k]).abs()))
        .fold(0.0, f64::max);

    let identical_without_gain = (spec.gamma == 0.0).then(|| {
        base.states.iter().all(|s| {
            let mut a0 = vec![0.0; s.q.len()];
            let mut a1 = a0.clone();
            let mut a2 = a0.clone();
            euler_lagrange_z(spec, Gauge::Original, &s.q, &s.v, &mut a0).is_ok()
                && euler_lagrange_z(spec, Gauge::First, &s.q, &s.v, &mut a1).is_ok()
                && euler_lagrange_z(spec, Gauge::Second, &s.q, &s.v, &mut a2).is_ok()
                && a0 == a1
                && a0 == a2
        })
    });

    let first_gauge_deviation = max_state_gap(&base, &first);
    let second_gauge_deviation = max_state_gap(&base, &second);
    let pass = first_gauge_deviation < GAUGE_TOLERANCE
        && second_gauge_deviation < GAUGE_TOLERANCE
        && routhian_deviation < GAUGE_TOLERANCE
        && identical_without_gain.unwrap_or(true);
    Ok(GaugeReport {
        model: spec.name.clone(),
        t_end,
        samples: base.len(),
        first_gauge_deviation,
        second_gauge_deviation,
        routhian_deviation,
        identical_without_gain,
        tolerance: GAUGE_TOLERANCE,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::PolynomialPotential;
    use crate::models::{self, QuarticTranslationalParams, RotationalParams, SumPotential};
    use std::sync::Arc;

    fn quartic(pairs: usize) -> SystemSpec {
        models::quartic_translational(&QuarticTranslationalParams {
            b: 0.4,
            alpha0: 0.3,
            pairs,
            coupling: 0.25,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn kinetic_only_energy() {
        let spec = models::bateman(0.0, 0.0, 0.5).unwrap();
        let s = PhaseState::new(0.0, vec![0.0, 0.0], vec![1.0, 1.0], Coords::X);
        assert_eq!(energy(&spec, &s).unwrap(), 0.5);
    }

    #[test]
    fn energy_forms_agree() {
        let spec = quartic(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let q: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = PhaseState::new(0.0, q, v, Coords::X);
            let hx = energy_x_form(&spec, &s).unwrap();
            let hz = energy_z_form(&spec, &s).unwrap();
            assert!((hx - hz).abs() < 1e-12 * hx.abs().max(1.0), "{hx} vs {hz}");
        }
    }

    #[test]
    fn co_moving_state_has_zero_charge() {
        let p = QuarticTranslationalParams {
            b: 0.4,
            ..Default::default()
        };
        let spec = models::quartic_translational(&p).unwrap();
        let zm = 0.7;
        let s = PhaseState::new(
            0.0,
            vec![0.1, zm],
            vec![p.gamma * p.f1().eval(zm), -0.3],
            Coords::Z,
        );
        assert!(translational_charges(&spec, &s).unwrap()[0].abs() < 1e-15);
        let free = spec.with_gamma(0.0);
        assert_eq!(translational_charges(&free, &s).unwrap()[0], s.v[0]);
    }

    #[test]
    fn angular_charge_matches_polar_momentum() {
        let spec = models::rotational_model(&RotationalParams::default()).unwrap();
        let polar = PhaseState::new(0.0, vec![1.3, 0.4], vec![0.2, -0.7], Coords::Polar);
        let l = rotational_charges(&spec, &polar).unwrap()[0];
        let p = momenta_from_velocities(&spec, &polar).unwrap();
        assert!((l - 2.0 * p[1]).abs() < 1e-12);
        let free = spec.with_gamma(0.0);
        let z = dynamics::to_z(&polar).unwrap();
        let l0 = rotational_charges(&free, &z).unwrap()[0];
        assert!((l0 - (z.q[1] * z.v[0] - z.q[0] * z.v[1])).abs() < 1e-15);
    }

    #[test]
    fn canonical_pair_bracket() {
        let spec = quartic(1);
        let b = poisson_bracket(
            &spec,
            PhaseFunction::Coordinate(0),
            PhaseFunction::Momentum(0),
            &[0.3, 0.2],
            &[0.1, 0.5],
            true,
        )
        .unwrap();
        assert_eq!(b.value, 1.0);
        assert!((b.finite_difference.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn value_only_functions_fall_back() {
        let spec = quartic(1);
        let b = poisson_bracket(
            &spec,
            PhaseFunction::EnergyValueOnly,
            PhaseFunction::Translational(0),
            &[0.3, 0.2],
            &[0.1, 0.5],
            false,
        )
        .unwrap();
        assert!(b.used_finite_differences);
        assert!(b.value.abs() < 1e-6);
    }

    #[test]
    fn involution_counts() {
        let r1 = involution_suite(&quartic(1), 100, 1).unwrap();
        assert_eq!(r1.brackets.len(), 1);
        assert_eq!(r1.charge_count, 2);
        assert!(r1.pass, "{r1:?}");
        assert!(r1.verdict.starts_with("completely integrable"));
        let r3 = involution_suite(&quartic(3), 100, 1).unwrap();
        assert_eq!(r3.brackets.len(), 6);
        assert!(r3.pass, "{r3:?}");
    }

    #[test]
    fn broken_potential_is_caught() {
        let spec = quartic(1);
        let broken = SystemSpec {
            potential: Arc::new(SumPotential(vec![
                spec.potential.clone(),
                Arc::new(PolynomialPotential::new(2, vec![(0.3, vec![2, 0])])),
            ])),
            ..spec
        };
        let r = involution_suite(&broken, 20, 1).unwrap();
        assert!(!r.pass);
        assert!(r.max_abs > 1e-3);
    }

    #[test]
    fn gauge_accelerations_agree_pointwise() {
        let spec = quartic(2);
        let z = [0.3, -0.4, 1.1, 0.2];
        let v = [0.5, -0.1, 0.2, 0.8];
        let mut a = [[0.0; 4]; 3];
        for (k, g) in [Gauge::Original, Gauge::First, Gauge::Second]
            .into_iter()
            .enumerate()
        {
            euler_lagrange_z(&spec, g, &z, &v, &mut a[k]).unwrap();
        }
        let s = PhaseState::new(0.0, z.to_vec(), v.to_vec(), Coords::Z);
        let direct = dynamics::eom_z(&spec, &s).unwrap();
        for acc in a {
            for k in 0..4 {
                assert!((acc[k] - direct[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_gain_gauges_coincide() {
        let spec = quartic(1).with_gamma(0.0);
        let s = PhaseState::new(0.0, vec![0.2, 0.5], vec![0.1, 0.0], Coords::Z);
        let r = gauge_equivalence(&spec, &s, &IntegratorConfig::default(), 5.0).unwrap();
        assert_eq!(r.identical_without_gain, Some(true));
        assert!(r.pass);
    }

    #[test]
    fn exchanged_direction_charges_and_reduction() {
        let p = QuarticTranslationalParams {
            b: 0.3,
            beta0: -1.0,
            direction: Direction::CyclicMinus,
            ..Default::default()
        };
        let spec = models::quartic_translational(&p).unwrap();
        let r = involution_suite(&spec, 50, 2).unwrap();
        assert!(r.pass, "{r:?}");
        let s = PhaseState::new(0.0, vec![0.4, 0.1], vec![0.0, 0.6], Coords::Z);
        let g = gauge_equivalence(&spec, &s, &IntegratorConfig::default(), 3.0).unwrap();
        assert!(g.pass, "{g:?}");
    }
}
