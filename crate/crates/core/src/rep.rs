//! Matrix representation of a balanced loss-gain system.
//!
//! Pairs `(x_{2i-1}, x_{2i})` are mapped to light-cone coordinates
//! `z± = (x_{2i-1} ± x_{2i})/√2`. Gain profiles and potentials are supplied
//! as trait objects with analytic first derivatives.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Coords, PhaseState};
use crate::poly::Polynomial;
use crate::{Error, Result};

/// Partial derivatives laid out as `[[∂F₁/∂u, ∂F₁/∂v], [∂F₂/∂u, ∂F₂/∂v]]`.
pub type Jac2 = [[f64; 2]; 2];

/// Light-cone coordinates `(z⁺, z⁻)` of a pair.
pub fn pair_to_z(xo: f64, xe: f64) -> (f64, f64) {
    ((xo + xe) * FRAC_1_SQRT_2, (xo - xe) * FRAC_1_SQRT_2)
}

/// Particle coordinates `(x_{2i-1}, x_{2i})` of a pair.
pub fn pair_to_x(zp: f64, zm: f64) -> (f64, f64) {
    ((zp + zm) * FRAC_1_SQRT_2, (zp - zm) * FRAC_1_SQRT_2)
}

/// `O J O` with the symmetric, self-inverse pair rotation `O`.
fn rotate_jacobian(j: Jac2) -> Jac2 {
    let s = 0.5;
    let (a, b, c, d) = (j[0][0], j[0][1], j[1][0], j[1][1]);
    [
        [s * (a + b + c + d), s * (a - b + c - d)],
        [s * (a + b - c - d), s * (a - b - c + d)],
    ]
}

/// Gain profile `(F_{2i-1}, F_{2i})` of a single pair.
///
/// Implementors provide either the particle-frame methods or the light-cone
/// methods; each pair of defaults is expressed through the other. At least
/// one pair must be overridden.
pub trait GainProfile: Debug + Send + Sync {
    fn value(&self, xo: f64, xe: f64) -> Result<[f64; 2]> {
        let (zp, zm) = pair_to_z(xo, xe);
        let [fp, fm] = self.value_z(zp, zm)?;
        let (fo, fe) = pair_to_x(fp, fm);
        Ok([fo, fe])
    }

    fn jacobian(&self, xo: f64, xe: f64) -> Result<Jac2> {
        let (zp, zm) = pair_to_z(xo, xe);
        Ok(rotate_jacobian(self.jacobian_z(zp, zm)?))
    }

    /// `Q`, the trace of the pair Jacobian.
    fn trace(&self, xo: f64, xe: f64) -> Result<f64> {
        let j = self.jacobian(xo, xe)?;
        Ok(j[0][0] + j[1][1])
    }

    /// `(F⁺, F⁻)` at `(z⁺, z⁻)`.
    fn value_z(&self, zp: f64, zm: f64) -> Result<[f64; 2]> {
        let (xo, xe) = pair_to_x(zp, zm);
        let [fo, fe] = self.value(xo, xe)?;
        let (fp, fm) = pair_to_z(fo, fe);
        Ok([fp, fm])
    }

    fn jacobian_z(&self, zp: f64, zm: f64) -> Result<Jac2> {
        let (xo, xe) = pair_to_x(zp, zm);
        Ok(rotate_jacobian(self.jacobian(xo, xe)?))
    }

    fn trace_z(&self, zp: f64, zm: f64) -> Result<f64> {
        let (xo, xe) = pair_to_x(zp, zm);
        self.trace(xo, xe)
    }
}

/// Potential `V(x₁, …, x_{2m})` with analytic gradient.
pub trait Potential: Debug + Send + Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Gradient of `V` with respect to the light-cone coordinates, ordered
/// `(∂/∂z₁⁺, ∂/∂z₁⁻, …)`, evaluated at a light-cone point.
pub fn potential_gradient_z(v: &dyn Potential, z: &[f64], out: &mut [f64]) -> Result<()> {
    let x = z_to_x_coords(z);
    v.gradient(&x, out)?;
    for pair in out.chunks_exact_mut(2) {
        let (gp, gm) = pair_to_z(pair[0], pair[1]);
        pair[0] = gp;
        pair[1] = gm;
    }
    Ok(())
}

pub fn x_to_z_coords(x: &[f64]) -> Vec<f64> {
    x.chunks_exact(2)
        .flat_map(|p| {
            let (a, b) = pair_to_z(p[0], p[1]);
            [a, b]
        })
        .collect()
}

pub fn z_to_x_coords(z: &[f64]) -> Vec<f64> {
    z.chunks_exact(2)
        .flat_map(|p| {
            let (a, b) = pair_to_x(p[0], p[1]);
            [a, b]
        })
        .collect()
}

/// Radial gain `g(ρ)` of a rotationally symmetric pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "c")]
pub enum RadialGain {
    Constant(f64),
    Linear(f64),
}

impl RadialGain {
    pub fn g(&self, rho: f64) -> f64 {
        match *self {
            RadialGain::Constant(c) => c,
            RadialGain::Linear(c) => c * rho,
        }
    }

    pub fn dg(&self, _rho: f64) -> f64 {
        match *self {
            RadialGain::Constant(_) => 0.0,
            RadialGain::Linear(c) => c,
        }
    }

    pub fn coefficient(&self) -> f64 {
        match *self {
            RadialGain::Constant(c) | RadialGain::Linear(c) => c,
        }
    }
}

/// Signed hyperbolic radius `sgn(z⁺)·√(z⁺² − z⁻²)`, zero outside the timelike
/// region.
pub fn signed_radius(zp: f64, zm: f64) -> f64 {
    let r2 = (zp - zm) * (zp + zm);
    if r2 <= 0.0 {
        0.0
    } else {
        r2.sqrt().copysign(zp)
    }
}

/// Which light-cone coordinate is cyclic for a translationally symmetric system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `V` and `Q` depend on `z⁻` only; the charges are `Πᵢ`.
    #[default]
    CyclicPlus,
    /// `V` and `Q` depend on `z⁺` only; the charges are `Πᵢ⁻`.
    CyclicMinus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Symmetry {
    None,
    /// `antiderivatives[i]` is `fᵢ = ∫ Qᵢ` along the non-cyclic coordinate.
    Translational {
        direction: Direction,
        antiderivatives: Vec<Polynomial>,
    },
    Rotational {
        gains: Vec<RadialGain>,
    },
}

impl Symmetry {
    pub fn label(&self) -> &'static str {
        match self {
            Symmetry::None => "none",
            Symmetry::Translational { .. } => "translational",
            Symmetry::Rotational { .. } => "rotational",
        }
    }
}

/// A complete model: pairs, gain parameter, profiles, potential and symmetry.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub name: String,
    pub gamma: f64,
    pub profiles: Vec<Arc<dyn GainProfile>>,
    pub potential: Arc<dyn Potential>,
    pub symmetry: Symmetry,
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        gamma: f64,
        profiles: Vec<Arc<dyn GainProfile>>,
        potential: Arc<dyn Potential>,
        symmetry: Symmetry,
    ) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Spec(
                "at least one gain/loss pair is required".into(),
            ));
        }
        if !gamma.is_finite() {
            return Err(Error::Spec(format!("gain parameter {gamma} is not finite")));
        }
        let m = profiles.len();
        match &symmetry {
            Symmetry::Translational {
                antiderivatives, ..
            } if antiderivatives.len() != m => {
                return Err(Error::Spec(format!(
                    "{} antiderivatives for {m} pairs",
                    antiderivatives.len()
                )))
            }
            Symmetry::Rotational { gains } if gains.len() != m => {
                return Err(Error::Spec(format!(
                    "{} radial gains for {m} pairs",
                    gains.len()
                )))
            }
            _ => {}
        }
        Ok(Self {
            name: name.into(),
            gamma,
            profiles,
            potential,
            symmetry,
        })
    }

    /// Number of pairs `m`.
    pub fn pairs(&self) -> usize {
        self.profiles.len()
    }

    /// Number of particles `N = 2m`.
    pub fn dim(&self) -> usize {
        2 * self.profiles.len()
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// `Qᵢ` at a particle-frame point.
    pub fn traces(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        self.profiles
            .iter()
            .zip(x.chunks_exact(2))
            .map(|(p, c)| p.trace(c[0], c[1]))
            .collect()
    }

    /// `Qᵢ` at a light-cone point.
    pub fn traces_z(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z.len())?;
        self.profiles
            .iter()
            .zip(z.chunks_exact(2))
            .map(|(p, c)| p.trace_z(c[0], c[1]))
            .collect()
    }

    /// Gain profile values `(F₁, …, F_{2m})` at a particle-frame point.
    pub fn gains(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut out = Vec::with_capacity(x.len());
        for (p, c) in self.profiles.iter().zip(x.chunks_exact(2)) {
            out.extend(p.value(c[0], c[1])?);
        }
        Ok(out)
    }

    /// `(F₁⁺, F₁⁻, …)` at a light-cone point.
    pub fn gains_z(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z.len())?;
        let mut out = Vec::with_capacity(z.len());
        for (p, c) in self.profiles.iter().zip(z.chunks_exact(2)) {
            out.extend(p.value_z(c[0], c[1])?);
        }
        Ok(out)
    }

    pub fn potential_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut g = vec![0.0; x.len()];
        self.potential.gradient(x, &mut g)?;
        Ok(g)
    }

    pub fn potential_gradient_z(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z.len())?;
        let mut g = vec![0.0; z.len()];
        potential_gradient_z(self.potential.as_ref(), z, &mut g)?;
        Ok(g)
    }

    /// Numerical check of the symmetry tag at the given light-cone points.
    /// Returns the largest violation found.
    pub fn symmetry_violation(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for z in points {
            self.check_dim(z.len())?;
            let gv = self.potential_gradient_z(z)?;
            let q = self.traces_z(z)?;
            match &self.symmetry {
                Symmetry::None => {}
                Symmetry::Translational {
                    direction,
                    antiderivatives,
                } => {
                    let (cyc, free) = match direction {
                        Direction::CyclicPlus => (0, 1),
                        Direction::CyclicMinus => (1, 0),
                    };
                    for (i, f) in antiderivatives.iter().enumerate() {
                        worst = worst.max(gv[2 * i + cyc].abs());
                        let dq = q[i] - f.derivative().eval(z[2 * i + free]);
                        worst = worst.max(dq.abs() / q[i].abs().max(1.0));
                    }
                }
                Symmetry::Rotational { gains } => {
                    for (i, g) in gains.iter().enumerate() {
                        let (zp, zm) = (z[2 * i], z[2 * i + 1]);
                        // boost generator annihilates V
                        worst = worst.max((zp * gv[2 * i + 1] + zm * gv[2 * i]).abs());
                        let rho = signed_radius(zp, zm);
                        let [fp, fm] = self.profiles[i].value_z(zp, zm)?;
                        worst = worst.max((fp - zp * g.g(rho)).abs());
                        worst = worst.max((fm - zm * g.g(rho)).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Matrices `M, A, D, J, R` and the pair traces `Qᵢ` at one point.
#[derive(Debug, Clone)]
pub struct MatrixRep {
    pub m: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q: Vec<f64>,
    pub gamma: f64,
}

/// Builds the representation at a particle-frame point.
pub fn build_matrix_rep(spec: &SystemSpec, point: &[f64]) -> Result<MatrixRep> {
    spec.check_dim(point.len())?;
    let n = spec.dim();
    let g = spec.gamma;
    let mut m = DMatrix::zeros(n, n);
    let mut a = DMatrix::zeros(n, n);
    let mut j = DMatrix::zeros(n, n);
    let mut d = DMatrix::zeros(n, n);
    let mut q = Vec::with_capacity(spec.pairs());
    for (i, (prof, c)) in spec.profiles.iter().zip(point.chunks_exact(2)).enumerate() {
        let (o, e) = (2 * i, 2 * i + 1);
        m[(o, e)] = 1.0;
        m[(e, o)] = 1.0;
        a[(o, e)] = -0.5 * g;
        a[(e, o)] = 0.5 * g;
        let jac = prof.jacobian(c[0], c[1])?;
        if jac.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "gain profile of pair {} not differentiable at {:?}",
                i + 1,
                c
            )));
        }
        j[(o, o)] = jac[0][0];
        j[(o, e)] = jac[0][1];
        j[(e, o)] = jac[1][0];
        j[(e, e)] = jac[1][1];
        let qi = prof.trace(c[0], c[1])?;
        d[(o, o)] = 0.5 * g * qi;
        d[(e, e)] = -0.5 * g * qi;
        q.push(qi);
    }
    let aj = &a * &j;
    let r = &aj - aj.transpose();
    Ok(MatrixRep {
        m,
        a,
        d,
        j,
        r,
        q,
        gamma: g,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub max_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub tolerance: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl StructureReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

impl MatrixRep {
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Adds `delta` to the first diagonal entry of `D`.
    pub fn inject_fault(&mut self, delta: f64) {
        self.d[(0, 0)] += delta;
    }

    pub fn verify_structure(&self, tolerance: f64) -> StructureReport {
        let mr = &self.m * &self.r;
        let anti = |x: &DMatrix<f64>, y: &DMatrix<f64>| max_abs(&(x * y + y * x));
        let mut off_diag: f64 = 0.0;
        for ((i, k), v) in mr
            .iter()
            .enumerate()
            .map(|(idx, v)| ((idx % mr.nrows(), idx / mr.nrows()), v))
        {
            if i != k {
                off_diag = off_diag.max(v.abs());
            }
        }
        let mut balance: f64 = 0.0;
        let mut q_trace: f64 = 0.0;
        for (i, qi) in self.q.iter().enumerate() {
            let (o, e) = (2 * i, 2 * i + 1);
            balance = balance.max((self.d[(o, o)] - 0.5 * self.gamma * qi).abs());
            balance = balance.max((self.d[(e, e)] + 0.5 * self.gamma * qi).abs());
            q_trace = q_trace.max((self.j[(o, o)] + self.j[(e, e)] - qi).abs());
        }
        let raw = [
            ("m_symmetric", max_abs(&(&self.m - self.m.transpose()))),
            ("a_antisymmetric", max_abs(&(&self.a + self.a.transpose()))),
            ("r_antisymmetric", max_abs(&(&self.r + self.r.transpose()))),
            ("d_symmetric", max_abs(&(&self.d - self.d.transpose()))),
            ("mr_equals_d", max_abs(&(&mr - &self.d))),
            ("mr_diagonal", off_diag),
            ("anticommutator_m_r", anti(&self.m, &self.r)),
            ("anticommutator_m_d", anti(&self.m, &self.d)),
            ("anticommutator_r_d", anti(&self.r, &self.d)),
            ("trace_d", self.d.trace().abs()),
            ("pairwise_balance", balance),
            ("q_is_jacobian_trace", q_trace),
        ];
        let checks: Vec<Check> = raw
            .iter()
            .map(|(name, dev)| Check {
                name: name.to_string(),
                max_deviation: *dev,
                pass: *dev < tolerance,
            })
            .collect();
        let pass = checks.iter().all(|c| c.pass);
        StructureReport {
            tolerance,
            checks,
            pass,
        }
    }
}

/// Maps a particle-frame state to light-cone coordinates.
pub fn x_to_z(state: &PhaseState) -> Result<PhaseState> {
    state.expect(Coords::X)?;
    Ok(PhaseState {
        t: state.t,
        q: x_to_z_coords(&state.q),
        v: x_to_z_coords(&state.v),
        coords: Coords::Z,
    })
}

pub fn z_to_x(state: &PhaseState) -> Result<PhaseState> {
    state.expect(Coords::Z)?;
    Ok(PhaseState {
        t: state.t,
        q: z_to_x_coords(&state.q),
        v: z_to_x_coords(&state.v),
        coords: Coords::X,
    })
}

/// Central-difference step `cbrt(ε)·max(1, |x|)`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Largest relative mismatch between a profile's analytic Jacobian and
/// central differences at `(xo, xe)`; also compares the light-cone values
/// against the rotated particle-frame values.
pub fn profile_derivative_error(p: &dyn GainProfile, xo: f64, xe: f64) -> Result<f64> {
    let jac = p.jacobian(xo, xe)?;
    let ho = fd_step(xo);
    let he = fd_step(xe);
    let fo_p = p.value(xo + ho, xe)?;
    let fo_m = p.value(xo - ho, xe)?;
    let fe_p = p.value(xo, xe + he)?;
    let fe_m = p.value(xo, xe - he)?;
    let mut worst: f64 = 0.0;
    for r in 0..2 {
        let d_o = (fo_p[r] - fo_m[r]) / (2.0 * ho);
        let d_e = (fe_p[r] - fe_m[r]) / (2.0 * he);
        worst = worst.max((d_o - jac[r][0]).abs() / jac[r][0].abs().max(1.0));
        worst = worst.max((d_e - jac[r][1]).abs() / jac[r][1].abs().max(1.0));
    }
    let [fo, fe] = p.value(xo, xe)?;
    let (zp, zm) = pair_to_z(xo, xe);
    let [fp, fm] = p.value_z(zp, zm)?;
    let (ep, em) = pair_to_z(fo, fe);
    worst = worst.max((fp - ep).abs()).max((fm - em).abs());
    Ok(worst)
}

/// Largest relative mismatch between the analytic potential gradient and
/// central differences.
pub fn potential_derivative_error(v: &dyn Potential, x: &[f64]) -> Result<f64> {
    let mut g = vec![0.0; x.len()];
    v.gradient(x, &mut g)?;
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        xp[i] = x[i] + h;
        let vp = v.value(&xp)?;
        xp[i] = x[i] - h;
        let vm = v.value(&xp)?;
        xp[i] = x[i];
        let fd = (vp - vm) / (2.0 * h);
        let scale = g[i].abs().max(v.value(x)?.abs()).max(1.0);
        worst = worst.max((fd - g[i]).abs() / scale);
    }
    Ok(worst)
}
