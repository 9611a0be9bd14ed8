//! Catalog of concrete systems and the building blocks they share.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::poly::Polynomial;
use crate::rep::{
    pair_to_x, pair_to_z, signed_radius, Direction, GainProfile, Jac2, Potential, RadialGain,
    Symmetry, SystemSpec,
};
use crate::{Error, Result};

/// `F = s·x` on both members of the pair, so `Q = 2s`.
#[derive(Debug, Clone, Copy)]
pub struct LinearProfile {
    pub s: f64,
}

impl LinearProfile {
    pub fn new(s: f64) -> Self {
        Self { s }
    }
}

impl GainProfile for LinearProfile {
    fn value(&self, xo: f64, xe: f64) -> Result<[f64; 2]> {
        Ok([self.s * xo, self.s * xe])
    }

    fn jacobian(&self, _xo: f64, _xe: f64) -> Result<Jac2> {
        Ok([[self.s, 0.0], [0.0, self.s]])
    }

    fn trace(&self, _xo: f64, _xe: f64) -> Result<f64> {
        Ok(2.0 * self.s)
    }
}

/// Profile whose trace depends on one light-cone coordinate only.
///
/// For [`Direction::CyclicPlus`], `F⁺ = λ z⁺ f'(z⁻)` and `F⁻ = (1 − λ) f(z⁻)`,
/// so `Q = f'(z⁻)` for every gauge weight `λ`. [`Direction::CyclicMinus`]
/// exchanges the roles of `z⁺` and `z⁻`.
#[derive(Debug, Clone)]
pub struct TranslationalProfile {
    f: Polynomial,
    df: Polynomial,
    ddf: Polynomial,
    lambda: f64,
    direction: Direction,
}

impl TranslationalProfile {
    pub fn new(f: Polynomial, lambda: f64, direction: Direction) -> Self {
        let df = f.derivative();
        let ddf = df.derivative();
        Self {
            f,
            df,
            ddf,
            lambda,
            direction,
        }
    }

    pub fn antiderivative(&self) -> &Polynomial {
        &self.f
    }
}

impl GainProfile for TranslationalProfile {
    fn value_z(&self, zp: f64, zm: f64) -> Result<[f64; 2]> {
        let l = self.lambda;
        Ok(match self.direction {
            Direction::CyclicPlus => [l * zp * self.df.eval(zm), (1.0 - l) * self.f.eval(zm)],
            Direction::CyclicMinus => [(1.0 - l) * self.f.eval(zp), l * zm * self.df.eval(zp)],
        })
    }

    fn jacobian_z(&self, zp: f64, zm: f64) -> Result<Jac2> {
        let l = self.lambda;
        Ok(match self.direction {
            Direction::CyclicPlus => {
                let d = self.df.eval(zm);
                [[l * d, l * zp * self.ddf.eval(zm)], [0.0, (1.0 - l) * d]]
            }
            Direction::CyclicMinus => {
                let d = self.df.eval(zp);
                [[(1.0 - l) * d, 0.0], [l * zm * self.ddf.eval(zp), l * d]]
            }
        })
    }

    fn trace_z(&self, zp: f64, zm: f64) -> Result<f64> {
        Ok(match self.direction {
            Direction::CyclicPlus => self.df.eval(zm),
            Direction::CyclicMinus => self.df.eval(zp),
        })
    }

    fn trace(&self, xo: f64, xe: f64) -> Result<f64> {
        let (zp, zm) = pair_to_z(xo, xe);
        self.trace_z(zp, zm)
    }
}

/// `F⁺ = z⁺ g(ρ)`, `F⁻ = z⁻ g(ρ)` with the signed radius `ρ`, equivalently
/// `F_{2i-1} = g x_{2i-1}`, `F_{2i} = g x_{2i}`.
#[derive(Debug, Clone, Copy)]
pub struct RadialProfile {
    pub gain: RadialGain,
}

impl RadialProfile {
    fn rho(xo: f64, xe: f64) -> f64 {
        let (zp, zm) = pair_to_z(xo, xe);
        signed_radius(zp, zm)
    }
}

impl GainProfile for RadialProfile {
    fn value(&self, xo: f64, xe: f64) -> Result<[f64; 2]> {
        let g = self.gain.g(Self::rho(xo, xe));
        Ok([g * xo, g * xe])
    }

    fn jacobian(&self, xo: f64, xe: f64) -> Result<Jac2> {
        let rho = Self::rho(xo, xe);
        let g = self.gain.g(rho);
        let dg = self.gain.dg(rho);
        let (ro, re) = if rho == 0.0 || dg == 0.0 {
            (0.0, 0.0)
        } else {
            (xe / rho, xo / rho)
        };
        Ok([
            [g + xo * dg * ro, xo * dg * re],
            [xe * dg * ro, g + xe * dg * re],
        ])
    }

    fn trace(&self, xo: f64, xe: f64) -> Result<f64> {
        let rho = Self::rho(xo, xe);
        Ok(2.0 * self.gain.g(rho) + rho * self.gain.dg(rho))
    }

    fn value_z(&self, zp: f64, zm: f64) -> Result<[f64; 2]> {
        let g = self.gain.g(signed_radius(zp, zm));
        Ok([zp * g, zm * g])
    }

    fn jacobian_z(&self, zp: f64, zm: f64) -> Result<Jac2> {
        let rho = signed_radius(zp, zm);
        let g = self.gain.g(rho);
        let dg = self.gain.dg(rho);
        let (rp, rm) = if rho == 0.0 || dg == 0.0 {
            (0.0, 0.0)
        } else {
            (zp / rho, -zm / rho)
        };
        Ok([
            [g + zp * dg * rp, zp * dg * rm],
            [zm * dg * rp, g + zm * dg * rm],
        ])
    }

    fn trace_z(&self, zp: f64, zm: f64) -> Result<f64> {
        let rho = signed_radius(zp, zm);
        Ok(2.0 * self.gain.g(rho) + rho * self.gain.dg(rho))
    }
}

/// `F_{2i-1} = ∫Q(x_{2i-1})`, `F_{2i} = 0`: the trace depends on the odd
/// coordinate alone.
#[derive(Debug, Clone)]
pub struct OddSectorProfile {
    q: Polynomial,
    f: Polynomial,
}

impl OddSectorProfile {
    pub fn new(q: Polynomial) -> Self {
        let f = q.antiderivative();
        Self { q, f }
    }
}

impl GainProfile for OddSectorProfile {
    fn value(&self, xo: f64, _xe: f64) -> Result<[f64; 2]> {
        Ok([self.f.eval(xo), 0.0])
    }

    fn jacobian(&self, xo: f64, _xe: f64) -> Result<Jac2> {
        Ok([[self.q.eval(xo), 0.0], [0.0, 0.0]])
    }

    fn trace(&self, xo: f64, _xe: f64) -> Result<f64> {
        Ok(self.q.eval(xo))
    }
}

/// Sum of monomials `c · Π xₖ^{eₖ}` in the particle coordinates.
#[derive(Debug, Clone)]
pub struct PolynomialPotential {
    dim: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl PolynomialPotential {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        for (_, e) in &terms {
            assert_eq!(
                e.len(),
                dim,
                "exponent vector length must equal the dimension"
            );
        }
        Self { dim, terms }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }
}

impl Potential for PolynomialPotential {
    fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(c, e)| {
                c * x
                    .iter()
                    .zip(e)
                    .map(|(xi, &ei)| xi.powi(ei as i32))
                    .product::<f64>()
            })
            .sum())
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, e) in &self.terms {
            for k in 0..self.dim {
                if e[k] == 0 {
                    continue;
                }
                let mut term = c * e[k] as f64;
                for (j, (xj, &ej)) in x.iter().zip(e).enumerate() {
                    let p = if j == k { ej - 1 } else { ej };
                    term *= xj.powi(p as i32);
                }
                out[k] += term;
            }
        }
        Ok(())
    }
}

/// Sum of several potentials.
#[derive(Debug, Clone)]
pub struct SumPotential(pub Vec<Arc<dyn Potential>>);

impl Potential for SumPotential {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.0.iter().map(|p| p.value(x)).sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut buf = vec![0.0; out.len()];
        for p in &self.0 {
            p.gradient(x, &mut buf)?;
            out.iter_mut().zip(&buf).for_each(|(o, b)| *o += b);
        }
        Ok(())
    }
}

/// `V = Σ uᵢ(wᵢ) + κ Σ (wᵢ − wᵢ₊₁)²` where `wᵢ` is `zᵢ⁻` or `zᵢ⁺`.
#[derive(Debug, Clone)]
pub struct LightConePotential {
    u: Vec<Polynomial>,
    du: Vec<Polynomial>,
    coupling: f64,
    direction: Direction,
}

impl LightConePotential {
    pub fn new(u: Vec<Polynomial>, coupling: f64, direction: Direction) -> Self {
        let du = u.iter().map(Polynomial::derivative).collect();
        Self {
            u,
            du,
            coupling,
            direction,
        }
    }

    fn sector(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 2 * self.u.len() {
            return Err(Error::Dimension {
                expected: 2 * self.u.len(),
                got: x.len(),
            });
        }
        Ok(x.chunks_exact(2)
            .map(|c| {
                let (zp, zm) = pair_to_z(c[0], c[1]);
                match self.direction {
                    Direction::CyclicPlus => zm,
                    Direction::CyclicMinus => zp,
                }
            })
            .collect())
    }
}

impl Potential for LightConePotential {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let w = self.sector(x)?;
        let own: f64 = self.u.iter().zip(&w).map(|(u, wi)| u.eval(*wi)).sum();
        let bond: f64 = w.windows(2).map(|p| (p[0] - p[1]).powi(2)).sum();
        Ok(own + self.coupling * bond)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let w = self.sector(x)?;
        let n = w.len();
        for i in 0..n {
            let mut dw = self.du[i].eval(w[i]);
            if i + 1 < n {
                dw += 2.0 * self.coupling * (w[i] - w[i + 1]);
            }
            if i > 0 {
                dw -= 2.0 * self.coupling * (w[i - 1] - w[i]);
            }
            let (gp, gm) = match self.direction {
                Direction::CyclicPlus => (0.0, dw),
                Direction::CyclicMinus => (dw, 0.0),
            };
            let (go, ge) = pair_to_x(gp, gm);
            out[2 * i] = go;
            out[2 * i + 1] = ge;
        }
        Ok(())
    }
}

/// `V = Σ [ω₀² sᵢ/4 + α₀ sᵢ²/8] + κ Σ (sᵢ − sᵢ₊₁)²` with `sᵢ = rᵢ² = 2x_{2i-1}x_{2i}`.
#[derive(Debug, Clone, Copy)]
pub struct RadialPotential {
    pub pairs: usize,
    pub omega0_sq: f64,
    pub alpha0: f64,
    pub coupling: f64,
}

impl RadialPotential {
    fn squares(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 2 * self.pairs {
            return Err(Error::Dimension {
                expected: 2 * self.pairs,
                got: x.len(),
            });
        }
        Ok(x.chunks_exact(2).map(|c| 2.0 * c[0] * c[1]).collect())
    }
}

impl Potential for RadialPotential {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let s = self.squares(x)?;
        let own: f64 = s
            .iter()
            .map(|si| 0.25 * self.omega0_sq * si + 0.125 * self.alpha0 * si * si)
            .sum();
        let bond: f64 = s.windows(2).map(|p| (p[0] - p[1]).powi(2)).sum();
        Ok(own + self.coupling * bond)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let s = self.squares(x)?;
        let n = s.len();
        for i in 0..n {
            let mut ds = 0.25 * self.omega0_sq + 0.25 * self.alpha0 * s[i];
            if i + 1 < n {
                ds += 2.0 * self.coupling * (s[i] - s[i + 1]);
            }
            if i > 0 {
                ds -= 2.0 * self.coupling * (s[i - 1] - s[i]);
            }
            out[2 * i] = ds * 2.0 * x[2 * i + 1];
            out[2 * i + 1] = ds * 2.0 * x[2 * i];
        }
        Ok(())
    }
}

/// Pole distance below which the Calogero potential refuses to evaluate.
pub const CALOGERO_POLE_GUARD: f64 = 1e-8;

/// `V = (ω²/2) Σ x_{2i}x_{2i−1} − g Σ_{i≠j} x_{2i}/(x_{2i−1} − x_{2j−1})³`.
#[derive(Debug, Clone, Copy)]
pub struct CalogeroPotential {
    pub pairs: usize,
    pub omega: f64,
    pub strength: f64,
}

impl CalogeroPotential {
    fn gap(&self, x: &[f64], i: usize, j: usize) -> Result<f64> {
        let d = x[2 * i] - x[2 * j];
        if d.abs() < CALOGERO_POLE_GUARD {
            return Err(Error::SingularPotential(format!(
                "x{} and x{} coincide (distance {d:e})",
                2 * i + 1,
                2 * j + 1
            )));
        }
        Ok(d)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != 2 * self.pairs {
            return Err(Error::Dimension {
                expected: 2 * self.pairs,
                got: x.len(),
            });
        }
        Ok(())
    }
}

impl Potential for CalogeroPotential {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let w2 = self.omega * self.omega;
        let mut v = 0.0;
        for i in 0..self.pairs {
            v += 0.5 * w2 * x[2 * i + 1] * x[2 * i];
            for j in 0..self.pairs {
                if i != j {
                    v -= self.strength * x[2 * i + 1] / self.gap(x, i, j)?.powi(3);
                }
            }
        }
        Ok(v)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(x)?;
        let w2 = self.omega * self.omega;
        let g = self.strength;
        for k in 0..self.pairs {
            let mut odd = 0.5 * w2 * x[2 * k + 1];
            let mut even = 0.5 * w2 * x[2 * k];
            for j in 0..self.pairs {
                if j == k {
                    continue;
                }
                let d = self.gap(x, k, j)?;
                even -= g / d.powi(3);
                odd += 3.0 * g * (x[2 * k + 1] - x[2 * j + 1]) / d.powi(4);
            }
            out[2 * k] = odd;
            out[2 * k + 1] = even;
        }
        Ok(())
    }
}

/// Quartic potential and polynomial gain for a translationally symmetric model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuarticTranslationalParams {
    pub omega0: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub pairs: usize,
    /// Nearest-neighbour coupling `κ Σ (zᵢ⁻ − zᵢ₊₁⁻)²`.
    pub coupling: f64,
    /// Gauge weight `λ` splitting the gain between `F⁺` and `F⁻`.
    pub gauge: f64,
    pub direction: Direction,
}

impl Default for QuarticTranslationalParams {
    fn default() -> Self {
        Self {
            omega0: SQRT_2,
            alpha0: 0.0,
            beta0: 1.0,
            a: 1.0,
            b: 0.0,
            gamma: 1.0,
            pairs: 1,
            coupling: 0.0,
            gauge: 0.5,
            direction: Direction::CyclicPlus,
        }
    }
}

impl QuarticTranslationalParams {
    /// `ω² = ω₀² − γ(√2 Π b + γ a²)`.
    pub fn omega_sq(&self, pi: f64) -> f64 {
        self.omega0 * self.omega0
            - self.gamma * (SQRT_2 * pi * self.b + self.gamma * self.a * self.a)
    }

    /// `α = α₀ − (3/√2) a b γ²`.
    pub fn alpha(&self) -> f64 {
        self.alpha0 - 3.0 * FRAC_1_SQRT_2 * self.a * self.b * self.gamma * self.gamma
    }

    /// `β = β₀ − γ² b²`.
    pub fn beta(&self) -> f64 {
        self.beta0 - self.gamma * self.gamma * self.b * self.b
    }

    /// Constant drive `γ Π a` in the reduced equation.
    pub fn drive(&self, pi: f64) -> f64 {
        self.gamma * pi * self.a
    }

    /// `α₀` that removes the cubic term.
    pub fn cubic_free_alpha0(&self) -> f64 {
        3.0 * FRAC_1_SQRT_2 * self.a * self.b * self.gamma * self.gamma
    }

    /// `f₁(w) = a w + (b/√2) w²`.
    pub fn f1(&self) -> Polynomial {
        Polynomial::new(vec![0.0, self.a, self.b * FRAC_1_SQRT_2])
    }

    /// `u(w) = −(ω₀²/4) w² − (α₀/6) w³ − (β₀/8) w⁴`.
    pub fn pair_potential(&self) -> Polynomial {
        Polynomial::new(vec![
            0.0,
            0.0,
            -0.25 * self.omega0 * self.omega0,
            -self.alpha0 / 6.0,
            -0.125 * self.beta0,
        ])
    }
}

pub fn quartic_translational(p: &QuarticTranslationalParams) -> Result<SystemSpec> {
    if p.pairs == 0 {
        return Err(Error::Spec("pairs must be positive".into()));
    }
    let f = p.f1();
    let profiles: Vec<Arc<dyn GainProfile>> = (0..p.pairs)
        .map(|_| {
            Arc::new(TranslationalProfile::new(f.clone(), p.gauge, p.direction))
                as Arc<dyn GainProfile>
        })
        .collect();
    let potential =
        LightConePotential::new(vec![p.pair_potential(); p.pairs], p.coupling, p.direction);
    SystemSpec::new(
        "quartic_translational",
        p.gamma,
        profiles,
        Arc::new(potential),
        Symmetry::Translational {
            direction: p.direction,
            antiderivatives: vec![f; p.pairs],
        },
    )
}

/// Rotationally symmetric model with radial gain `g` and quartic radial potential.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationalParams {
    pub gain: RadialGain,
    pub omega0: f64,
    pub alpha0: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub pairs: usize,
    #[serde(default)]
    pub coupling: f64,
}

fn one() -> usize {
    1
}

impl Default for RotationalParams {
    fn default() -> Self {
        Self {
            gain: RadialGain::Linear(1.0),
            omega0: 1.0,
            alpha0: 3.0,
            gamma: 1.0,
            pairs: 1,
            coupling: 0.0,
        }
    }
}

impl RotationalParams {
    /// Linear coefficient of the co-rotating radial equation
    /// `r̈ + ω_eff² r + α_eff r³ = 0`.
    pub fn effective_omega_sq(&self) -> f64 {
        match self.gain {
            RadialGain::Constant(c) => self.omega0 * self.omega0 - self.gamma * self.gamma * c * c,
            RadialGain::Linear(_) => self.omega0 * self.omega0,
        }
    }

    /// Cubic coefficient, `α = α₀ − 2γ²c²` for linear gain.
    pub fn effective_alpha(&self) -> f64 {
        match self.gain {
            RadialGain::Constant(_) => self.alpha0,
            RadialGain::Linear(c) => self.alpha0 - 2.0 * self.gamma * self.gamma * c * c,
        }
    }
}

pub fn rotational_model(p: &RotationalParams) -> Result<SystemSpec> {
    if p.pairs == 0 {
        return Err(Error::Spec("pairs must be positive".into()));
    }
    let name = match p.gain {
        RadialGain::Constant(_) => "rotational_constant_g",
        RadialGain::Linear(_) => "rotational_linear_g",
    };
    let profiles: Vec<Arc<dyn GainProfile>> = (0..p.pairs)
        .map(|_| Arc::new(RadialProfile { gain: p.gain }) as Arc<dyn GainProfile>)
        .collect();
    let potential = RadialPotential {
        pairs: p.pairs,
        omega0_sq: p.omega0 * p.omega0,
        alpha0: p.alpha0,
        coupling: p.coupling,
    };
    SystemSpec::new(
        name,
        p.gamma,
        profiles,
        Arc::new(potential),
        Symmetry::Rotational {
            gains: vec![p.gain; p.pairs],
        },
    )
}

/// Dissipative rational Calogero model with one-way coupling to its bath.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalogeroParams {
    pub pairs: usize,
    pub omega: f64,
    pub strength: f64,
    pub gamma: f64,
    /// `Qᵢ(x_{2i−1})`, ascending coefficients; one entry per pair or a single
    /// entry shared by all.
    pub q_profiles: Vec<Vec<f64>>,
}

impl Default for CalogeroParams {
    fn default() -> Self {
        Self {
            pairs: 2,
            omega: 1.0,
            strength: 0.5,
            gamma: 0.3,
            q_profiles: vec![vec![1.0, 0.2]],
        }
    }
}

pub fn calogero_unidirectional(p: &CalogeroParams) -> Result<SystemSpec> {
    if p.pairs < 2 {
        return Err(Error::Spec(
            "the Calogero model needs at least two pairs".into(),
        ));
    }
    let q: Vec<Polynomial> = match p.q_profiles.len() {
        1 => vec![Polynomial::new(p.q_profiles[0].clone()); p.pairs],
        n if n == p.pairs => p.q_profiles.iter().cloned().map(Polynomial::new).collect(),
        n => return Err(Error::Spec(format!("{n} Q profiles for {} pairs", p.pairs))),
    };
    let profiles: Vec<Arc<dyn GainProfile>> = q
        .into_iter()
        .map(|qi| Arc::new(OddSectorProfile::new(qi)) as Arc<dyn GainProfile>)
        .collect();
    let potential = CalogeroPotential {
        pairs: p.pairs,
        omega: p.omega,
        strength: p.strength,
    };
    SystemSpec::new(
        "calogero_unidirectional",
        p.gamma,
        profiles,
        Arc::new(potential),
        Symmetry::None,
    )
}

/// Sextic quasi-exactly solvable model.
///
/// `ã` and `b̃` are stored directly; the raw couplings follow from
/// `α² = ã² + a²` and `β² = b̃² + b²`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SexticQesParams {
    pub atilde: f64,
    pub btilde: f64,
    pub n: usize,
    pub p: u8,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

impl SexticQesParams {
    pub fn new(atilde: f64, btilde: f64, n: usize, p: u8) -> Result<Self> {
        let s = Self {
            atilde,
            btilde,
            n,
            p,
            a: 0.0,
            b: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    /// From the raw couplings; `ã = √(α² − a²)` and `b̃ = √(β² − b²)`.
    pub fn from_raw(alpha: f64, beta: f64, a: f64, b: f64, n: usize, p: u8) -> Result<Self> {
        let at2 = alpha * alpha - a * a;
        let bt2 = beta * beta - b * b;
        if at2 < 0.0 {
            return Err(Error::Parameter(format!(
                "ã² = α² − a² = {at2} is negative"
            )));
        }
        if bt2 < 0.0 {
            return Err(Error::Parameter(format!(
                "b̃² = β² − b² = {bt2} is negative"
            )));
        }
        let s = Self {
            atilde: at2.sqrt(),
            btilde: bt2.sqrt(),
            n,
            p,
            a,
            b,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p > 1 {
            return Err(Error::Parameter(format!(
                "p must be 0 or 1, got {}",
                self.p
            )));
        }
        if !(self.atilde.is_finite()
            && self.btilde.is_finite()
            && self.a.is_finite()
            && self.b.is_finite())
        {
            return Err(Error::Parameter("non-finite QES parameter".into()));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.atilde.hypot(self.a)
    }

    pub fn beta(&self) -> f64 {
        self.btilde.hypot(self.b)
    }

    /// `V'(z) = ã²z⁶ + 2ãb̃z⁴ + (b̃² − ã(4n+2p+3))z² − b̃(1+2p)`.
    pub fn reduced_potential(&self) -> Polynomial {
        let (at, bt) = (self.atilde, self.btilde);
        let (n, p) = (self.n as f64, f64::from(self.p));
        Polynomial::new(vec![
            -bt * (1.0 + 2.0 * p),
            0.0,
            bt * bt - at * (4.0 * n + 2.0 * p + 3.0),
            0.0,
            2.0 * at * bt,
            0.0,
            at * at,
        ])
    }

    /// Classical potential in `z⁻` whose quantum problem reduces to `V'`.
    pub fn potential(&self) -> Polynomial {
        let (at, bt) = (self.atilde, self.btilde);
        let (al, be) = (self.alpha(), self.beta());
        let (n, p) = (self.n as f64, f64::from(self.p));
        Polynomial::new(vec![
            bt * (1.0 + 2.0 * p),
            0.0,
            -be * be + at * (4.0 * n + 2.0 * p + 3.0),
            0.0,
            -2.0 * at * bt - 2.0 * self.a * self.b,
            0.0,
            -al * al,
        ])
    }

    /// `f₁(z) = (2/γ)(a z³ + b z)`.
    pub fn f1(&self, gamma: f64) -> Result<Polynomial> {
        if gamma == 0.0 {
            return Err(Error::Parameter("the QES gain profile needs γ ≠ 0".into()));
        }
        Ok(Polynomial::new(vec![
            0.0,
            2.0 * self.b / gamma,
            0.0,
            2.0 * self.a / gamma,
        ]))
    }

    /// Translationally symmetric classical system with this potential and gain.
    pub fn system_spec(&self, gamma: f64) -> Result<SystemSpec> {
        let f = self.f1(gamma)?;
        let potential = LightConePotential::new(vec![self.potential()], 0.0, Direction::CyclicPlus);
        SystemSpec::new(
            "sextic_qes",
            gamma,
            vec![Arc::new(TranslationalProfile::new(
                f.clone(),
                0.5,
                Direction::CyclicPlus,
            ))],
            Arc::new(potential),
            Symmetry::Translational {
                direction: Direction::CyclicPlus,
                antiderivatives: vec![f],
            },
        )
    }
}

/// Bateman-type pair: `V = (ω²/2) x₁x₂`, `F = s·x`.
pub fn bateman(omega: f64, gamma: f64, s: f64) -> Result<SystemSpec> {
    SystemSpec::new(
        "bateman",
        gamma,
        vec![Arc::new(LinearProfile::new(s))],
        Arc::new(PolynomialPotential::new(
            2,
            vec![(0.5 * omega * omega, vec![1, 1])],
        )),
        Symmetry::None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{eom_x, eom_z, Coords, PhaseState};
    use crate::rep::{potential_derivative_error, profile_derivative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cubic_free_choice() {
        let mut p = QuarticTranslationalParams {
            a: 0.7,
            b: 0.4,
            gamma: 1.3,
            ..Default::default()
        };
        p.alpha0 = p.cubic_free_alpha0();
        assert!(p.alpha().abs() < 1e-15);
    }

    #[test]
    fn constant_gain_keeps_beta() {
        let p = QuarticTranslationalParams {
            b: 0.0,
            alpha0: 0.0,
            beta0: 2.5,
            gamma: 0.8,
            ..Default::default()
        };
        assert_eq!(p.beta(), 2.5);
        assert_eq!(p.alpha(), 0.0);
    }

    #[test]
    fn linear_gain_frequency() {
        let p = QuarticTranslationalParams {
            a: 0.0,
            b: 0.6,
            gamma: 0.9,
            omega0: 1.5,
            ..Default::default()
        };
        let pi = 0.4;
        assert!((p.omega_sq(pi) - (2.25 - SQRT_2 * 0.9 * pi * 0.6)).abs() < 1e-15);
    }

    #[test]
    fn half_gauge_unit_slope_is_half_identity() {
        let spec = quartic_translational(&QuarticTranslationalParams::default()).unwrap();
        let f = spec.gains(&[0.3, -1.1]).unwrap();
        assert!((f[0] - 0.15).abs() < 1e-15 && (f[1] + 0.55).abs() < 1e-15);
    }

    #[test]
    fn gain_off_rotational_is_central() {
        let spec = rotational_model(&RotationalParams {
            gamma: 0.0,
            ..Default::default()
        })
        .unwrap();
        let s = PhaseState::new(0.0, vec![0.5, 0.9], vec![0.3, 0.1], Coords::X);
        let a = eom_x(&spec, &s).unwrap();
        let g = spec.potential_gradient(&s.q).unwrap();
        assert_eq!(a, vec![-2.0 * g[1], -2.0 * g[0]]);
    }

    #[test]
    fn rotational_derived_alpha() {
        let p = RotationalParams::default();
        assert_eq!(p.effective_alpha(), 1.0);
    }

    #[test]
    fn qes_reduced_potential_anchors() {
        let q = SexticQesParams::new(1.3, 0.4, 0, 0).unwrap();
        let v = q.reduced_potential();
        let expected = [-0.4, 0.0, 0.16 - 3.9, 0.0, 2.0 * 1.3 * 0.4, 0.0, 1.69];
        for (c, e) in v.coeffs().iter().zip(expected) {
            assert!((c - e).abs() < 1e-15);
        }
        let flat = SexticQesParams::new(0.0, 0.7, 2, 1)
            .unwrap()
            .reduced_potential();
        assert_eq!(flat.degree(), 2);
        assert!((flat.coeff(0) + 2.1).abs() < 1e-15 && (flat.coeff(2) - 0.49).abs() < 1e-15);
        let free = SexticQesParams::from_raw(1.2, 0.5, 1.2, 0.5, 0, 0).unwrap();
        assert_eq!((free.atilde, free.btilde), (0.0, 0.0));
        assert!(free.reduced_potential().is_zero());
        assert!(SexticQesParams::from_raw(0.5, 1.0, 1.0, 0.0, 0, 0).is_err());
        assert!(SexticQesParams::new(1.0, 1.0, 0, 2).is_err());
    }

    #[test]
    fn qes_potential_reduces_to_v_prime() {
        // V' = −(γ f₁/2)² − V
        let q = SexticQesParams::from_raw(1.5, 0.9, 0.6, 0.3, 2, 1).unwrap();
        let gamma = 0.7;
        let f = q.f1(gamma).unwrap();
        let v = q.potential();
        let vp = q.reduced_potential();
        for z in [-1.3, -0.2, 0.0, 0.5, 1.7] {
            let lhs = -(0.5 * gamma * f.eval(z)).powi(2) - v.eval(z);
            assert!((lhs - vp.eval(z)).abs() < 1e-12 * vp.eval(z).abs().max(1.0));
        }
    }

    fn catalog() -> Vec<SystemSpec> {
        vec![
            quartic_translational(&QuarticTranslationalParams {
                alpha0: 0.4,
                b: 0.3,
                pairs: 3,
                coupling: 0.2,
                ..Default::default()
            })
            .unwrap(),
            quartic_translational(&QuarticTranslationalParams {
                b: 0.5,
                direction: Direction::CyclicMinus,
                gauge: 0.2,
                ..Default::default()
            })
            .unwrap(),
            rotational_model(&RotationalParams {
                gain: RadialGain::Constant(0.6),
                ..Default::default()
            })
            .unwrap(),
            rotational_model(&RotationalParams {
                pairs: 2,
                coupling: 0.3,
                ..Default::default()
            })
            .unwrap(),
            calogero_unidirectional(&CalogeroParams {
                pairs: 3,
                ..Default::default()
            })
            .unwrap(),
            SexticQesParams::from_raw(1.5, 0.9, 0.6, 0.3, 1, 0)
                .unwrap()
                .system_spec(0.8)
                .unwrap(),
            bateman(1.1, 0.4, 0.5).unwrap(),
        ]
    }

    fn timelike_point(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * m);
        for _ in 0..m {
            let zp: f64 = rng.gen_range(0.5..2.0);
            let zm = zp * rng.gen_range(-0.8..0.8);
            let (xo, xe) = pair_to_x(zp, zm);
            x.extend([xo, xe]);
        }
        x
    }

    #[test]
    fn catalog_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in catalog() {
            for _ in 0..100 {
                let mut x = timelike_point(&mut rng, spec.pairs());
                if spec.name == "calogero_unidirectional" {
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi += 3.0 * i as f64;
                    }
                }
                let e = potential_derivative_error(spec.potential.as_ref(), &x).unwrap();
                assert!(e < 1e-6, "{}: potential error {e}", spec.name);
                for (p, c) in spec.profiles.iter().zip(x.chunks_exact(2)) {
                    let e = profile_derivative_error(p.as_ref(), c[0], c[1]).unwrap();
                    assert!(e < 1e-6, "{}: profile error {e}", spec.name);
                }
            }
        }
    }

    #[test]
    fn catalog_symmetry_tags_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in catalog() {
            let pts: Vec<Vec<f64>> = (0..50)
                .map(|_| crate::rep::x_to_z_coords(&timelike_point(&mut rng, spec.pairs())))
                .collect();
            let v = spec.symmetry_violation(&pts).unwrap();
            assert!(v < 1e-12, "{}: {v}", spec.name);
        }
    }

    #[test]
    fn calogero_gain_off_is_rational_calogero() {
        let p = CalogeroParams {
            pairs: 2,
            gamma: 0.0,
            omega: 0.8,
            strength: 0.7,
            ..Default::default()
        };
        let spec = calogero_unidirectional(&p).unwrap();
        let s = PhaseState::new(
            0.0,
            vec![0.3, 1.0, 1.5, -2.0],
            vec![0.1, 0.2, 0.3, 0.4],
            Coords::X,
        );
        let a = eom_x(&spec, &s).unwrap();
        let d: f64 = 0.3 - 1.5;
        let w2 = 0.64;
        assert!((a[0] - (-w2 * 0.3 + 2.0 * 0.7 / d.powi(3))).abs() < 1e-13);
        assert!((a[2] - (-w2 * 1.5 - 2.0 * 0.7 / d.powi(3))).abs() < 1e-13);
        let bath = -w2 * 1.0 - 6.0 * 0.7 * (1.0 - -2.0) / d.powi(4);
        assert!((a[1] - bath).abs() < 1e-13);
    }

    #[test]
    fn calogero_pole_is_refused() {
        let spec = calogero_unidirectional(&CalogeroParams::default()).unwrap();
        let s = PhaseState::new(
            0.0,
            vec![0.5, 1.0, 0.5 + 1e-9, 2.0],
            vec![0.0; 4],
            Coords::X,
        );
        assert!(matches!(eom_x(&spec, &s), Err(Error::SingularPotential(_))));
    }

    #[test]
    fn calogero_bath_is_linear_in_even_coordinates() {
        let spec = calogero_unidirectional(&CalogeroParams {
            pairs: 3,
            ..Default::default()
        })
        .unwrap();
        let base = vec![0.1, 0.4, 1.3, -0.2, 2.9, 0.7];
        let v = vec![0.2, -0.1, 0.3, 0.5, -0.4, 0.1];
        let h = 1e-2;
        for k in [1, 3, 5] {
            let at = |dx: f64| {
                let mut q = base.clone();
                q[k] += dx;
                eom_x(&spec, &PhaseState::new(0.0, q, v.clone(), Coords::X)).unwrap()
            };
            let (ap, a0, am) = (at(h), at(0.0), at(-h));
            for j in [1, 3, 5] {
                let second = (ap[j] - 2.0 * a0[j] + am[j]) / (h * h);
                assert!(second.abs() < 1e-8, "k={k} j={j}: {second}");
            }
        }
    }

    #[test]
    fn translational_reduced_force() {
        // z̈⁻ along ż⁺ = γf + Π equals d/dz⁻ [(γ²/2) f² + γΠf + 2V]
        let p = QuarticTranslationalParams {
            alpha0: 0.3,
            b: 0.4,
            a: 0.8,
            ..Default::default()
        };
        let spec = quartic_translational(&p).unwrap();
        let f = p.f1();
        let u = p.pair_potential();
        let pi = 0.35;
        for zm in [-1.2, -0.3, 0.0, 0.6, 1.4] {
            let zp = 0.77;
            let s = PhaseState::new(
                0.0,
                vec![zp, zm],
                vec![pi + p.gamma * f.eval(zm), 0.3],
                Coords::Z,
            );
            let a = eom_z(&spec, &s).unwrap();
            let g = p.gamma;
            let expected = g * g * f.eval(zm) * f.derivative().eval(zm)
                + g * pi * f.derivative().eval(zm)
                + 2.0 * u.derivative().eval(zm);
            assert!((a[1] - expected).abs() < 1e-10);
            assert!((a[0] - g * f.derivative().eval(zm) * 0.3).abs() < 1e-12);
        }
    }
}
