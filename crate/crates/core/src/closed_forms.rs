//! Exact elliptic solution families, their ODE-residual oracle and the
//! bounded-orbit stability gate.
//!
//! The reduced coordinate (`z⁻` for the translational families, `r` for the
//! rotational ones) solves a quartic oscillator `ẅ + ω²w + βw³ = 0` and is a
//! Jacobi function of `Ωt`. The cyclic coordinate (`z⁺`, respectively `θ`)
//! is obtained by Gauss-Legendre quadrature of its first-order equation; the
//! closed antiderivatives are kept as cross-checks only.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Coords, PhaseState};
use crate::elliptic::{complete_k, epsilon, jacobi, jacobi_derivatives};
use crate::models::{
    quartic_translational, rotational_model, QuarticTranslationalParams, RotationalParams,
};
use crate::ode::IntegratorConfig;
use crate::quad::GaussLegendre;
use crate::rep::{RadialGain, SystemSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "trans-cn")]
    TransCn,
    #[serde(rename = "trans-sn")]
    TransSn,
    #[serde(rename = "trans-dn")]
    TransDn,
    #[serde(rename = "trans-cn2")]
    TransCn2,
    #[serde(rename = "rot-I")]
    RotI,
    #[serde(rename = "rot-II-cn")]
    RotIICn,
    #[serde(rename = "rot-II-sn")]
    RotIISn,
}

impl CaseTag {
    pub const ALL: [CaseTag; 7] = [
        CaseTag::TransCn,
        CaseTag::TransSn,
        CaseTag::TransDn,
        CaseTag::TransCn2,
        CaseTag::RotI,
        CaseTag::RotIICn,
        CaseTag::RotIISn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::TransCn => "trans-cn",
            CaseTag::TransSn => "trans-sn",
            CaseTag::TransDn => "trans-dn",
            CaseTag::TransCn2 => "trans-cn2",
            CaseTag::RotI => "rot-I",
            CaseTag::RotIICn => "rot-II-cn",
            CaseTag::RotIISn => "rot-II-sn",
        }
    }

    pub fn is_translational(&self) -> bool {
        matches!(
            self,
            CaseTag::TransCn | CaseTag::TransSn | CaseTag::TransDn | CaseTag::TransCn2
        )
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseTag::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown case tag {s:?}")))
    }
}

/// Quartic-oscillator solution branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `ω² > 0, β > 0`: `A cn`.
    Cn,
    /// `ω² > 0, β < 0`: `A sn`.
    Sn,
    /// `ω² < 0, β > 0`, inner amplitudes: `A dn`.
    Dn,
    /// `ω² < 0, β > 0`, outer amplitudes: `A cn`.
    OuterCn,
}

/// How the printed `k` relates to the elliptic parameter `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `k` is the modulus, so the printed `k²` is `m`.
    Modulus,
    /// `k` is already the parameter, so `m = √(printed k²)`.
    Parameter,
}

/// Variant of the inner `dn` branch formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DnVariant {
    /// `Ω = √(βA²/2)` rather than `Ω = βA²/2`.
    pub root_omega: bool,
    /// `k² = (βA² − |ω²|)/Ω²` rather than `(βA² − |ω²|)/(2Ω²)`.
    pub derived_param: bool,
}

/// The conventions that pass the residual oracle.
pub const FROZEN_CONVENTION: Convention = Convention::Modulus;
pub const FROZEN_DN: DnVariant = DnVariant {
    root_omega: true,
    derived_param: true,
};

/// `(Ω, printed k²)` for a branch; no window validation.
pub fn branch_parameters(
    branch: Branch,
    w2: f64,
    beta: f64,
    amplitude: f64,
    dn: DnVariant,
) -> (f64, f64) {
    let a2 = amplitude * amplitude;
    match branch {
        Branch::Cn => {
            let o2 = w2 + beta * a2;
            (o2.sqrt(), beta * a2 / (2.0 * o2))
        }
        Branch::Sn => {
            let o2 = w2 - beta.abs() * a2 / 2.0;
            (o2.sqrt(), beta.abs() * a2 / (2.0 * o2))
        }
        Branch::OuterCn => {
            let o2 = beta * a2 - w2.abs();
            (o2.sqrt(), beta * a2 / (2.0 * o2))
        }
        Branch::Dn => {
            let half = beta * a2 / 2.0;
            let omega = if dn.root_omega { half.sqrt() } else { half };
            let num = beta * a2 - w2.abs();
            let k2 = if dn.derived_param {
                num / (omega * omega)
            } else {
                num / (2.0 * omega * omega)
            };
            (omega, k2)
        }
    }
}

fn parameter_from(k2: f64, convention: Convention) -> f64 {
    match convention {
        Convention::Modulus => k2,
        Convention::Parameter => k2.sqrt(),
    }
}

/// Model behind a closed-form family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClosedFormModel {
    Translational(QuarticTranslationalParams),
    Rotational(RotationalParams),
}

impl ClosedFormModel {
    pub fn system_spec(&self) -> Result<SystemSpec> {
        match self {
            ClosedFormModel::Translational(p) => quartic_translational(p),
            ClosedFormModel::Rotational(p) => rotational_model(p),
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            ClosedFormModel::Translational(p) => p.gamma,
            ClosedFormModel::Rotational(p) => p.gamma,
        }
    }

    /// Sets a named model parameter, as used by parameter scans.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match self {
            ClosedFormModel::Translational(p) => match name {
                "gamma" => &mut p.gamma,
                "omega0" => &mut p.omega0,
                "alpha0" => &mut p.alpha0,
                "beta0" => &mut p.beta0,
                "a" => &mut p.a,
                "b" => &mut p.b,
                "coupling" => &mut p.coupling,
                _ => {
                    return Err(Error::Config(format!(
                        "unknown translational parameter {name:?}"
                    )))
                }
            },
            ClosedFormModel::Rotational(p) => match name {
                "gamma" => &mut p.gamma,
                "omega0" => &mut p.omega0,
                "alpha0" => &mut p.alpha0,
                "coupling" => &mut p.coupling,
                "c" => {
                    p.gain = match p.gain {
                        RadialGain::Constant(_) => RadialGain::Constant(value),
                        RadialGain::Linear(_) => RadialGain::Linear(value),
                    };
                    return Ok(());
                }
                _ => {
                    return Err(Error::Config(format!(
                        "unknown rotational parameter {name:?}"
                    )))
                }
            },
        };
        *slot = value;
        Ok(())
    }

    /// Resets `α₀` so the cubic term of the reduced oscillator vanishes.
    pub fn make_cubic_free(&mut self) {
        if let ClosedFormModel::Translational(p) = self {
            p.alpha0 = p.cubic_free_alpha0();
        }
    }

    /// Reference parameters for each case, used by `verify` and the tests.
    pub fn reference(case: CaseTag) -> (Self, f64) {
        let trans = |omega0: f64, beta0: f64, b: f64| {
            let mut p = QuarticTranslationalParams {
                omega0,
                beta0,
                a: 1.0,
                b,
                gamma: 1.0,
                ..Default::default()
            };
            p.alpha0 = p.cubic_free_alpha0();
            ClosedFormModel::Translational(p)
        };
        match case {
            CaseTag::TransCn => (trans(2f64.sqrt(), 1.0, 0.0), 1.0),
            CaseTag::TransSn => (trans(1.5, 0.25, 1.0), 0.9),
            CaseTag::TransDn => (trans(0.6, 1.5, 0.5), 0.9),
            CaseTag::TransCn2 => (trans(0.6, 1.5, 0.5), 1.6),
            CaseTag::RotI => (
                ClosedFormModel::Rotational(RotationalParams {
                    gain: RadialGain::Constant(0.3),
                    omega0: 1.2,
                    alpha0: 1.0,
                    gamma: 1.0,
                    pairs: 1,
                    coupling: 0.0,
                }),
                0.8,
            ),
            CaseTag::RotIICn => (
                ClosedFormModel::Rotational(RotationalParams::default()),
                1.0,
            ),
            CaseTag::RotIISn => (
                ClosedFormModel::Rotational(RotationalParams {
                    gain: RadialGain::Linear(1.0),
                    omega0: 1.0,
                    alpha0: 1.0,
                    gamma: 1.0,
                    pairs: 1,
                    coupling: 0.0,
                }),
                0.8,
            ),
        }
    }
}

/// A fully parameterised closed-form solution.
#[derive(Debug, Clone, Serialize)]
pub struct EllipticSolution {
    pub case: CaseTag,
    pub branch: Branch,
    pub amplitude: f64,
    pub omega: f64,
    pub param: f64,
    /// Value of the cyclic coordinate (`z⁺` or `θ`) at `t = 0`.
    pub offset: f64,
    /// Linear and cubic coefficients of the reduced quartic oscillator.
    pub w2: f64,
    pub beta: f64,
    pub model: ClosedFormModel,
}

fn gate(ok: bool, text: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::range(text))
    }
}

/// Reduced oscillator coefficients `(ω², β)` of a case, after checking the
/// model kind and the cubic-free condition.
pub fn reduced_coefficients(case: CaseTag, model: &ClosedFormModel) -> Result<(f64, f64)> {
    match (case.is_translational(), model) {
        (true, ClosedFormModel::Translational(p)) => {
            gate(p.pairs == 1, "closed forms need a single pair")?;
            let alpha = p.alpha();
            gate(
                alpha.abs() <= 1e-12 * p.alpha0.abs().max(1.0),
                "α = α₀ − 3abγ²/√2 must vanish",
            )?;
            Ok((p.omega_sq(0.0), p.beta()))
        }
        (false, ClosedFormModel::Rotational(p)) => {
            gate(p.pairs == 1, "closed forms need a single pair")?;
            match (case, p.gain) {
                (CaseTag::RotI, RadialGain::Constant(_)) => {
                    Ok((p.effective_omega_sq(), p.effective_alpha()))
                }
                (CaseTag::RotI, _) => Err(Error::range("rot-I needs a constant gain g = c")),
                (_, RadialGain::Linear(_)) => Ok((p.effective_omega_sq(), p.effective_alpha())),
                _ => Err(Error::range("rot-II needs a linear gain g = c r")),
            }
        }
        (true, _) => Err(Error::range(
            "translational case needs the quartic translational model",
        )),
        (false, _) => Err(Error::range("rotational case needs a rotational model")),
    }
}

fn select_branch(
    case: CaseTag,
    w2: f64,
    beta: f64,
    amplitude: f64,
    alpha0: Option<f64>,
) -> Result<Branch> {
    let a2 = amplitude * amplitude;
    match case {
        CaseTag::TransCn => {
            gate(w2 > 0.0, "ω² > 0")?;
            gate(beta > 0.0, "β > 0")?;
            Ok(Branch::Cn)
        }
        CaseTag::TransSn => {
            gate(w2 > 0.0, "ω² > 0")?;
            gate(beta < 0.0, "β < 0")?;
            gate(a2 <= w2 / beta.abs(), "A ≤ √(ω²/|β|)")?;
            Ok(Branch::Sn)
        }
        CaseTag::TransDn => {
            gate(w2 < 0.0, "ω² < 0")?;
            gate(beta > 0.0, "β > 0")?;
            gate(
                a2 >= w2.abs() / beta && a2 <= 2.0 * w2.abs() / beta,
                "√(|ω²|/β) ≤ A ≤ √(2|ω²|/β)",
            )?;
            Ok(Branch::Dn)
        }
        CaseTag::TransCn2 => {
            gate(w2 < 0.0, "ω² < 0")?;
            gate(beta > 0.0, "β > 0")?;
            gate(a2 >= 2.0 * w2.abs() / beta, "A ≥ √(2|ω²|/β)")?;
            Ok(Branch::OuterCn)
        }
        CaseTag::RotIICn => {
            gate(w2 > 0.0, "ω₀² > 0")?;
            gate(beta > 0.0, "α = α₀ − 2γ²c² > 0")?;
            gate(alpha0.unwrap_or(1.0) > 0.0, "α₀ > 0")?;
            Ok(Branch::Cn)
        }
        CaseTag::RotIISn => {
            gate(w2 > 0.0, "ω₀² > 0")?;
            gate(beta < 0.0, "α = α₀ − 2γ²c² < 0")?;
            gate(a2 <= w2 / beta.abs(), "A ≤ √(ω₀²/|α|)")?;
            Ok(Branch::Sn)
        }
        CaseTag::RotI => {
            if w2 > 0.0 && beta > 0.0 {
                Ok(Branch::Cn)
            } else if w2 > 0.0 && beta < 0.0 {
                gate(a2 <= w2 / beta.abs(), "A ≤ √(ω_eff²/|β|)")?;
                Ok(Branch::Sn)
            } else if w2 < 0.0 && beta > 0.0 {
                if a2 >= 2.0 * w2.abs() / beta {
                    Ok(Branch::OuterCn)
                } else {
                    gate(a2 >= w2.abs() / beta, "A ≥ √(|ω_eff²|/β)")?;
                    Ok(Branch::Dn)
                }
            } else {
                Err(Error::range("no elliptic branch: need ω_eff² > 0 or β > 0"))
            }
        }
    }
}

impl EllipticSolution {
    /// Builds the solution with the frozen conventions.
    pub fn new(case: CaseTag, model: ClosedFormModel, amplitude: f64) -> Result<Self> {
        Self::with_conventions(case, model, amplitude, FROZEN_CONVENTION, FROZEN_DN)
    }

    pub fn with_conventions(
        case: CaseTag,
        model: ClosedFormModel,
        amplitude: f64,
        convention: Convention,
        dn: DnVariant,
    ) -> Result<Self> {
        gate(amplitude > 0.0 && amplitude.is_finite(), "A > 0")?;
        let (w2, beta) = reduced_coefficients(case, &model)?;
        let alpha0 = match &model {
            ClosedFormModel::Rotational(p) => Some(p.alpha0),
            _ => None,
        };
        let branch = select_branch(case, w2, beta, amplitude, alpha0)?;
        let (omega, k2) = branch_parameters(branch, w2, beta, amplitude, dn);
        let param = parameter_from(k2, convention);
        gate(omega > 0.0 && omega.is_finite(), "Ω² > 0")?;
        gate(param > 0.0 && param < 1.0, "0 < k² < 1")?;
        Ok(Self {
            case,
            branch,
            amplitude,
            omega,
            param,
            offset: 0.0,
            w2,
            beta,
            model,
        })
    }

    /// Period of the reduced coordinate.
    pub fn period(&self) -> Result<f64> {
        let k = complete_k(self.param)?;
        Ok(match self.branch {
            Branch::Dn => 2.0 * k / self.omega,
            _ => 4.0 * k / self.omega,
        })
    }

    /// Reduced coordinate and its first two time derivatives.
    pub fn reduced(&self, t: f64) -> Result<[f64; 3]> {
        let d = jacobi_derivatives(self.omega * t, self.param)?;
        let idx = match self.branch {
            Branch::Sn => 0,
            Branch::Cn | Branch::OuterCn => 1,
            Branch::Dn => 2,
        };
        let v = [d.values.sn, d.values.cn, d.values.dn][idx];
        let a = self.amplitude;
        Ok([
            a * v,
            a * self.omega * d.d1[idx],
            a * self.omega * self.omega * d.d2[idx],
        ])
    }

    /// Right-hand side of the cyclic coordinate's first-order equation as a
    /// function of the reduced coordinate: `γf₁(z⁻)` or `γg(r)`.
    fn cyclic_rate(&self, w: f64) -> f64 {
        match &self.model {
            ClosedFormModel::Translational(p) => p.gamma * p.f1().eval(w),
            ClosedFormModel::Rotational(p) => p.gamma * p.gain.g(w),
        }
    }

    fn cyclic_rate_slope(&self, w: f64) -> f64 {
        match &self.model {
            ClosedFormModel::Translational(p) => p.gamma * p.f1().derivative().eval(w),
            ClosedFormModel::Rotational(p) => p.gamma * p.gain.dg(w),
        }
    }

    /// `z⁺(t)` or `θ(t)` by composite Gauss-Legendre quadrature.
    pub fn cyclic(&self, t: f64) -> Result<f64> {
        self.advance_cyclic(0.0, self.offset, t)
    }

    /// Cyclic coordinate at each time, accumulating the quadrature between
    /// consecutive samples.
    pub fn cyclic_series(&self, times: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(times.len());
        let (mut t0, mut c0) = (0.0, self.offset);
        for &t in times {
            c0 = self.advance_cyclic(t0, c0, t)?;
            t0 = t;
            out.push(c0);
        }
        Ok(out)
    }

    fn advance_cyclic(&self, t0: f64, c0: f64, t1: f64) -> Result<f64> {
        if t1 == t0 {
            return Ok(c0);
        }
        let period = self.period()?;
        let panels = (((t1 - t0).abs() / period) * 16.0).ceil().max(1.0) as usize;
        let gl = GaussLegendre::new(16);
        let mut err = None;
        let integral = gl.integrate_composite(t0, t1, panels, |s| match self.reduced(s) {
            Ok(w) => self.cyclic_rate(w[0]),
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(c0 + integral),
        }
    }

    fn state_with_cyclic(&self, t: f64, c: f64) -> Result<(PhaseState, [f64; 2])> {
        let [w, wd, wdd] = self.reduced(t)?;
        let cd = self.cyclic_rate(w);
        let cdd = self.cyclic_rate_slope(w) * wd;
        match self.model {
            ClosedFormModel::Translational(_) => Ok((
                PhaseState::new(t, vec![c, w], vec![cd, wd], Coords::Z),
                [cdd, wdd],
            )),
            ClosedFormModel::Rotational(_) => {
                let (ch, sh) = (c.cosh(), c.sinh());
                let (r, rd, rdd, thd, thdd) = (w, wd, wdd, cd, cdd);
                let q = vec![r * ch, r * sh];
                let v = vec![rd * ch + r * sh * thd, rd * sh + r * ch * thd];
                let app = rdd * ch + 2.0 * rd * sh * thd + r * ch * thd * thd + r * sh * thdd;
                let amm = rdd * sh + 2.0 * rd * ch * thd + r * sh * thd * thd + r * ch * thdd;
                Ok((PhaseState::new(t, q, v, Coords::Z), [app, amm]))
            }
        }
    }

    /// Full light-cone state at `t` and its exact acceleration.
    pub fn z_state(&self, t: f64) -> Result<(PhaseState, [f64; 2])> {
        self.state_with_cyclic(t, self.cyclic(t)?)
    }

    /// [`Self::z_state`] over a time grid.
    pub fn z_states(&self, times: &[f64]) -> Result<Vec<(PhaseState, [f64; 2])>> {
        let cs = self.cyclic_series(times)?;
        times
            .iter()
            .zip(cs)
            .map(|(&t, c)| self.state_with_cyclic(t, c))
            .collect()
    }

    /// Particle coordinates `(x₁, x₂)` at `t`.
    pub fn x_coords(&self, t: f64) -> Result<[f64; 2]> {
        let (s, _) = self.z_state(t)?;
        let x = crate::rep::z_to_x_coords(&s.q);
        Ok([x[0], x[1]])
    }

    /// `(r, θ, x₁, x₂)` for the rotational families.
    pub fn rot_point(&self, t: f64) -> Result<[f64; 4]> {
        if self.case.is_translational() {
            return Err(Error::Spec(format!(
                "{} is not a rotational case",
                self.case
            )));
        }
        let r = self.reduced(t)?[0];
        let th = self.cyclic(t)?;
        Ok([
            r,
            th,
            r * FRAC_1_SQRT_2 * th.exp(),
            r * FRAC_1_SQRT_2 * (-th).exp(),
        ])
    }

    /// Closed antiderivative of the cyclic rate, up to a constant, valid on
    /// `(0, 2K/Ω)`. The cn displays use `arccos`, the sn displays `log`, and
    /// the dn display the amplitude function.
    pub fn printed_cyclic(&self, t: f64) -> Result<f64> {
        let u = self.omega * t;
        let m = self.param;
        let j = jacobi(u, m)?;
        let (sn, cn, dn) = (j.sn, j.cn, j.dn);
        let e = epsilon(u, m)?;
        let a_amp = self.amplitude;
        let om = self.omega;
        let (lin, quad) = match &self.model {
            ClosedFormModel::Translational(p) => (p.a * p.gamma, p.b * p.gamma),
            ClosedFormModel::Rotational(p) => match p.gain {
                RadialGain::Constant(c) => return Ok(c * p.gamma * t),
                RadialGain::Linear(c) => (c * p.gamma, 0.0),
            },
        };
        let s2 = std::f64::consts::SQRT_2;
        Ok(match self.branch {
            Branch::Cn | Branch::OuterCn => {
                let bracket =
                    u - u / m + e * (-1.0 + 1.0 / m + cn * cn) / (dn * (1.0 - m * sn * sn).sqrt());
                quad * a_amp * a_amp / (om * s2) * bracket
                    + lin * a_amp / om * dn.acos() * sn / (1.0 - dn * dn).sqrt()
            }
            Branch::Sn => {
                let bracket = u - e * (1.0 - m * sn * sn).sqrt() / dn;
                quad * a_amp * a_amp / (s2 * om * m) * bracket
                    + lin * a_amp / (m.sqrt() * om) * (dn - m.sqrt() * cn).ln()
            }
            Branch::Dn => {
                quad * a_amp * a_amp / (om * s2) * (e * dn / (1.0 - m * sn * sn).sqrt())
                    + lin * a_amp / om * j.am
            }
        })
    }

    /// Largest gap between quadrature and the closed antiderivative on the
    /// principal interval, both measured from the quarter point.
    pub fn antiderivative_crosscheck(&self, samples: usize) -> Result<f64> {
        let half = complete_k(self.param)? / self.omega;
        let t_ref = 0.5 * half;
        let q_ref = self.cyclic(t_ref)?;
        let p_ref = self.printed_cyclic(t_ref)?;
        let mut worst: f64 = 0.0;
        for k in 1..samples {
            let t = 2.0 * half * k as f64 / samples as f64;
            let dq = self.cyclic(t)? - q_ref;
            let dp = self.printed_cyclic(t)? - p_ref;
            worst = worst.max((dq - dp).abs() / dq.abs().max(1.0));
        }
        Ok(worst)
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        self.model.system_spec()
    }

    /// Light-cone initial data of the solution at `t = 0`.
    pub fn initial_state(&self) -> Result<PhaseState> {
        Ok(self.z_state(0.0)?.0)
    }
}

/// Maximum ODE residual of a closed form on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub samples: usize,
    /// Governing-chart residual: light-cone for translational cases, polar
    /// `(r, θ)` for rotational ones (over samples with `r > 10⁻³A`).
    pub max_residual: f64,
    /// Light-cone residual of a rotational case, restricted to `cosh θ ≤ 10²`
    /// where `z⁺² − z⁻²` keeps enough digits.
    pub light_cone_residual: Option<f64>,
}

pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
const LIGHT_CONE_COSH_LIMIT: f64 = 1e2;

/// Substitutes the closed form into the model's equations of motion.
pub fn residual_check(
    sol: &EllipticSolution,
    spec: &SystemSpec,
    times: &[f64],
) -> Result<ResidualReport> {
    let rot = !sol.case.is_translational();
    let mut worst: f64 = 0.0;
    let mut cone: Option<f64> = None;
    let cyclic = sol.cyclic_series(times)?;
    for (&t, th) in times.iter().zip(cyclic) {
        let (state, acc) = sol.state_with_cyclic(t, th)?;
        if rot {
            let [r, rd, rdd] = sol.reduced(t)?;
            if r > 1e-3 * sol.amplitude {
                let ps =
                    PhaseState::new(t, vec![r, th], vec![rd, sol.cyclic_rate(r)], Coords::Polar);
                let a = dynamics::eom_polar(spec, &ps)?;
                let thdd = sol.cyclic_rate_slope(r) * rd;
                worst = worst.max((a[0] - rdd).abs()).max((a[1] - thdd).abs());
            }
            if th.cosh() <= LIGHT_CONE_COSH_LIMIT {
                let eom = dynamics::eom_z(spec, &state)?;
                let e = (acc[0] - eom[0]).abs().max((acc[1] - eom[1]).abs());
                cone = Some(cone.unwrap_or(0.0).max(e));
            }
        } else {
            let eom = dynamics::eom_z(spec, &state)?;
            worst = worst
                .max((acc[0] - eom[0]).abs())
                .max((acc[1] - eom[1]).abs());
        }
    }
    if worst.is_nan() {
        worst = f64::INFINITY;
    }
    Ok(ResidualReport {
        samples: times.len(),
        max_residual: worst,
        light_cone_residual: cone,
    })
}

/// `n` evenly spaced samples over `periods` periods.
pub fn period_grid(sol: &EllipticSolution, periods: f64, n: usize) -> Result<Vec<f64>> {
    let t_end = periods * sol.period()?;
    Ok((0..n)
        .map(|k| t_end * k as f64 / (n - 1).max(1) as f64)
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantResult {
    pub label: String,
    pub omega: f64,
    pub param: f64,
    /// `None` when `Ω` or the parameter leave their admissible ranges.
    pub residual: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConventionReport {
    pub case: CaseTag,
    pub variants: Vec<VariantResult>,
    /// Labels of the variants whose residual is below tolerance.
    pub passing: Vec<String>,
}

/// Runs the residual oracle for each reading of the printed formulas.
pub fn convention_report(
    case: CaseTag,
    model: &ClosedFormModel,
    amplitude: f64,
) -> Result<ConventionReport> {
    let spec = model.system_spec()?;
    let mut dn_variants = vec![FROZEN_DN];
    if matches!(case, CaseTag::TransDn) {
        dn_variants = vec![
            DnVariant {
                root_omega: false,
                derived_param: false,
            },
            DnVariant {
                root_omega: true,
                derived_param: false,
            },
            DnVariant {
                root_omega: false,
                derived_param: true,
            },
            DnVariant {
                root_omega: true,
                derived_param: true,
            },
        ];
    }
    let (w2, beta) = reduced_coefficients(case, model)?;
    let alpha0 = match model {
        ClosedFormModel::Rotational(p) => Some(p.alpha0),
        _ => None,
    };
    let branch = select_branch(case, w2, beta, amplitude, alpha0)?;
    let mut variants = Vec::new();
    for dn in &dn_variants {
        for conv in [Convention::Modulus, Convention::Parameter] {
            let mut label = match conv {
                Convention::Modulus => "k is the modulus".to_string(),
                Convention::Parameter => "k is the parameter".to_string(),
            };
            if branch == Branch::Dn {
                label = format!(
                    "{label}; Ω = {}; k² = {}",
                    if dn.root_omega {
                        "√(βA²/2)"
                    } else {
                        "βA²/2"
                    },
                    if dn.derived_param {
                        "(βA² − |ω²|)/Ω²"
                    } else {
                        "(βA² − |ω²|)/(2Ω²)"
                    }
                );
            }
            let (omega, k2) = branch_parameters(branch, w2, beta, amplitude, *dn);
            let param = parameter_from(k2, conv);
            let residual = if omega > 0.0 && omega.is_finite() && (0.0..1.0).contains(&param) {
                let sol = EllipticSolution {
                    case,
                    branch,
                    amplitude,
                    omega,
                    param,
                    offset: 0.0,
                    w2,
                    beta,
                    model: model.clone(),
                };
                let grid = period_grid(&sol, 10.0, 1000)?;
                Some(residual_check(&sol, &spec, &grid)?.max_residual)
            } else {
                None
            };
            variants.push(VariantResult {
                label,
                omega,
                param,
                residual,
                pass: residual.is_some_and(|r| r < RESIDUAL_TOLERANCE),
            });
        }
    }
    let passing = variants
        .iter()
        .filter(|v| v.pass)
        .map(|v| v.label.clone())
        .collect();
    Ok(ConventionReport {
        case,
        variants,
        passing,
    })
}

/// Stability statements attached to each case.
pub fn recorded_claims(case: CaseTag) -> (Option<bool>, Vec<&'static str>) {
    match case {
        CaseTag::TransCn | CaseTag::TransSn => (
            None,
            vec![
                "The solutions obtained for case-I are not stable.",
                "For α₀ = b = 0 (constant gain-loss) the solutions are stable.",
            ],
        ),
        CaseTag::TransDn => (
            Some(false),
            vec!["z⁺ is unbounded for 0 < k < 1 on the dn branch."],
        ),
        CaseTag::TransCn2 => (
            Some(true),
            vec!["The outer cn branch is the stable solution for ω² < 0."],
        ),
        CaseTag::RotI => (
            Some(false),
            vec!["x₁ is always growing and x₂ always decaying; no stable solutions."],
        ),
        CaseTag::RotIICn | CaseTag::RotIISn => (
            Some(true),
            vec!["x₁ and x₂ are non-singular, stable and periodic."],
        ),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityVerdict {
    pub case: CaseTag,
    pub method: &'static str,
    pub periods: f64,
    pub t_end: f64,
    /// Per observed coordinate: sup over the first and the second half.
    pub sup_first_half: Vec<f64>,
    pub sup_second_half: Vec<f64>,
    pub bounded: bool,
    pub recorded_stable: Option<bool>,
    pub claims: Vec<&'static str>,
    pub blow_up_time: Option<f64>,
}

pub const GATE_PERIODS: f64 = 20.0;
const GATE_SAMPLES: usize = 2000;

fn bounded_from(first: &[f64], second: &[f64]) -> bool {
    first
        .iter()
        .zip(second)
        .all(|(s1, s2)| s2.is_finite() && *s2 <= 1.05 * s1 + 1e-9 * s1.max(1.0))
}

fn sup_halves(series: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = series.len();
    let dim = series.first().map_or(0, |r| r.len());
    let mut s1 = vec![0.0f64; dim];
    let mut s2 = vec![0.0f64; dim];
    for (k, row) in series.iter().enumerate() {
        let target = if 2 * k < n { &mut s1 } else { &mut s2 };
        for (d, v) in row.iter().enumerate() {
            target[d] = target[d].max(v.abs());
        }
    }
    (s1, s2)
}

/// Bounded-orbit gate. With `pi = 0` inside the case window the closed
/// form is sampled over [`GATE_PERIODS`] periods; otherwise the model is
/// integrated (see [`integrated_boundedness`]).
pub fn stability_gate(
    case: CaseTag,
    model: &ClosedFormModel,
    amplitude: f64,
    pi: f64,
) -> Result<StabilityVerdict> {
    if pi != 0.0 {
        return integrated_boundedness(case, model, amplitude, pi);
    }
    let (recorded_stable, claims) = recorded_claims(case);
    let sol = EllipticSolution::new(case, model.clone(), amplitude)?;
    let t_end = GATE_PERIODS * sol.period()?;
    let times: Vec<f64> = (0..GATE_SAMPLES)
        .map(|k| t_end * k as f64 / (GATE_SAMPLES - 1) as f64)
        .collect();
    let series: Vec<Vec<f64>> = sol
        .z_states(&times)?
        .into_iter()
        .map(|(s, _)| observed(case, &s.q))
        .collect();
    let (s1, s2) = sup_halves(&series);
    Ok(StabilityVerdict {
        case,
        method: "closed_form",
        periods: GATE_PERIODS,
        t_end,
        bounded: bounded_from(&s1, &s2),
        sup_first_half: s1,
        sup_second_half: s2,
        recorded_stable,
        claims,
        blow_up_time: None,
    })
}

/// `(z⁻, z⁺)` for translational cases, `(x₁, x₂)` for rotational ones.
fn observed(case: CaseTag, z: &[f64]) -> Vec<f64> {
    if case.is_translational() {
        vec![z[1], z[0]]
    } else {
        crate::rep::z_to_x_coords(z)
    }
}

/// Integrates the model from the turning point of the reduced coordinate:
/// `z⁻ = A`, `ż⁺ = Π + γf₁(A)` for translational models and `r = A`,
/// `θ̇ = γg(A)` for rotational ones. A blow-up counts as unbounded.
pub fn integrated_boundedness(
    case: CaseTag,
    model: &ClosedFormModel,
    amplitude: f64,
    pi: f64,
) -> Result<StabilityVerdict> {
    let (recorded_stable, claims) = recorded_claims(case);
    let spec = model.system_spec()?;
    let (w2, init) = match model {
        ClosedFormModel::Translational(p) => (
            p.omega_sq(pi),
            PhaseState::new(
                0.0,
                vec![0.0, amplitude],
                vec![pi + p.gamma * p.f1().eval(amplitude), 0.0],
                Coords::Z,
            ),
        ),
        ClosedFormModel::Rotational(p) => {
            if pi != 0.0 {
                return Err(Error::Spec(
                    "a non-zero charge applies to the translational cases only".into(),
                ));
            }
            let thd = p.gamma * p.gain.g(amplitude);
            (
                p.effective_omega_sq(),
                PhaseState::new(
                    0.0,
                    vec![amplitude, 0.0],
                    vec![0.0, amplitude * thd],
                    Coords::Z,
                ),
            )
        }
    };
    let period = 2.0 * PI / w2.abs().sqrt().max(0.1);
    let t_end = GATE_PERIODS * period;
    let cfg = IntegratorConfig::default().with_output(t_end / GATE_SAMPLES as f64);
    let (traj, blow_up_time) = match dynamics::integrate(&spec, &init, &cfg, t_end) {
        Ok(t) => (t, None),
        Err(Error::Integration(f)) => {
            let t = f.t;
            (f.partial, Some(t))
        }
        Err(e) => return Err(e),
    };
    let series: Vec<Vec<f64>> = traj.states.iter().map(|s| observed(case, &s.q)).collect();
    let (s1, s2) = sup_halves(&series);
    Ok(StabilityVerdict {
        case,
        method: "integration",
        periods: GATE_PERIODS,
        t_end,
        bounded: blow_up_time.is_none() && bounded_from(&s1, &s2),
        sup_first_half: s1,
        sup_second_half: s2,
        recorded_stable,
        claims,
        blow_up_time,
    })
}

/// One point of a parameter scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub omega_sq: f64,
    pub beta: f64,
    /// `None` inside the case window, otherwise the violated gate.
    pub gate: Option<String>,
    pub verdict: StabilityVerdict,
}

/// Window verdict plus a boundedness measurement, by closed form inside the
/// window and by integration outside it.
pub fn scan_point(
    case: CaseTag,
    model: &ClosedFormModel,
    amplitude: f64,
    pi: f64,
) -> Result<ScanPoint> {
    let (omega_sq, beta) = match model {
        ClosedFormModel::Translational(p) => (p.omega_sq(pi), p.beta()),
        ClosedFormModel::Rotational(p) => (p.effective_omega_sq(), p.effective_alpha()),
    };
    let gate = match EllipticSolution::new(case, model.clone(), amplitude) {
        Ok(_) => None,
        Err(Error::Range { gate }) => Some(gate),
        Err(e) => return Err(e),
    };
    let verdict = if gate.is_none() && pi == 0.0 {
        stability_gate(case, model, amplitude, 0.0)?
    } else {
        integrated_boundedness(case, model, amplitude, pi)?
    };
    Ok(ScanPoint {
        omega_sq,
        beta,
        gate,
        verdict,
    })
}

/// Largest deviation between an integration from the closed-form initial
/// data and the closed form itself, over `periods` periods. Translational
/// cases compare `(z⁺, z⁻)` and divide by `max(1, |closed form|)`.
/// Rotational ones compare `(x₁, x₂)` and divide by the envelope
/// `max(1, A e^{±θ}/√2)`, since `r` crosses zero while `e^θ` grows.
pub fn integration_deviation(
    sol: &EllipticSolution,
    periods: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let spec = sol.system_spec()?;
    let t_end = periods * sol.period()?;
    let cfg = cfg.clone().with_output(t_end / 400.0);
    let rot = !sol.case.is_translational();
    // rotational orbits reach cosh θ ≫ 1, where z⁺ − z⁻ cancels; the
    // particle frame keeps both x₁ and x₂ to full relative precision
    let init = if rot {
        dynamics::to_x(&sol.initial_state()?)?
    } else {
        sol.initial_state()?
    };
    let traj = dynamics::integrate(&spec, &init, &cfg, t_end)?;
    let times: Vec<f64> = traj.states.iter().map(|s| s.t).collect();
    let (exact, scale): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if rot {
        let th = sol.cyclic_series(&times)?;
        let env = sol.amplitude.abs() * FRAC_1_SQRT_2;
        times
            .iter()
            .zip(th)
            .map(|(&t, th)| {
                let r = sol.reduced(t)?[0] * FRAC_1_SQRT_2;
                let (up, down) = (th.exp(), (-th).exp());
                Ok((
                    vec![r * up, r * down],
                    vec![(env * up).max(1.0), (env * down).max(1.0)],
                ))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip()
    } else {
        let q: Vec<Vec<f64>> = sol
            .z_states(&times)?
            .into_iter()
            .map(|(s, _)| s.q)
            .collect();
        let sc = q
            .iter()
            .map(|v| v.iter().map(|y| y.abs().max(1.0)).collect())
            .collect();
        (q, sc)
    };
    let mut worst: f64 = 0.0;
    for ((s, b), sc) in traj.states.iter().zip(&exact).zip(&scale) {
        for ((x, y), d) in s.q.iter().zip(b).zip(sc) {
            worst = worst.max((x - y).abs() / d);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormReport {
    pub case: CaseTag,
    pub params: ClosedFormModel,
    pub amplitude: f64,
    pub omega: f64,
    pub param: f64,
    pub period: f64,
    pub residual: ResidualReport,
    pub antiderivative_gap: f64,
    pub stability: StabilityVerdict,
    pub conventions: ConventionReport,
    pub pass: bool,
}

/// Residual, conventions, cross-check and stability for one case.
pub fn closed_form_report(
    case: CaseTag,
    model: &ClosedFormModel,
    amplitude: f64,
) -> Result<ClosedFormReport> {
    let sol = EllipticSolution::new(case, model.clone(), amplitude)?;
    let spec = sol.system_spec()?;
    let grid = period_grid(&sol, 10.0, 1000)?;
    let residual = residual_check(&sol, &spec, &grid)?;
    let antiderivative_gap = sol.antiderivative_crosscheck(64)?;
    let stability = stability_gate(case, model, amplitude, 0.0)?;
    let conventions = convention_report(case, model, amplitude)?;
    let pass = residual.max_residual < RESIDUAL_TOLERANCE
        && residual
            .light_cone_residual
            .is_none_or(|p| p < RESIDUAL_TOLERANCE)
        && antiderivative_gap < 1e-8
        && conventions.passing.len() == 1;
    Ok(ClosedFormReport {
        case,
        params: model.clone(),
        amplitude,
        omega: sol.omega,
        param: sol.param,
        period: sol.period()?,
        residual,
        antiderivative_gap,
        stability,
        conventions,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(case: CaseTag) -> EllipticSolution {
        let (m, a) = ClosedFormModel::reference(case);
        EllipticSolution::new(case, m, a).unwrap()
    }

    #[test]
    fn cn_example_arithmetic() {
        let sol = reference(CaseTag::TransCn);
        assert!((sol.w2 - 1.0).abs() < 1e-15 && (sol.beta - 1.0).abs() < 1e-15);
        assert!((sol.omega - 2f64.sqrt()).abs() < 1e-15);
        assert!((sol.param - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cn_initial_data() {
        let sol = reference(CaseTag::TransCn);
        let [w, wd, _] = sol.reduced(0.0).unwrap();
        assert_eq!(w, sol.amplitude);
        assert_eq!(wd, 0.0);
    }

    #[test]
    fn rot_two_cn_example_arithmetic() {
        let sol = reference(CaseTag::RotIICn);
        assert_eq!(sol.beta, 1.0);
        assert!((sol.omega - 2f64.sqrt()).abs() < 1e-15);
        assert!((sol.param - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sn_window_edge() {
        let (model, _) = ClosedFormModel::reference(CaseTag::TransSn);
        let (w2, beta) = reduced_coefficients(CaseTag::TransSn, &model).unwrap();
        let edge = (w2 / beta.abs()).sqrt();
        let (omega, k2) = branch_parameters(Branch::Sn, w2, beta, edge, FROZEN_DN);
        assert!(omega * omega > 0.0);
        assert!((k2 - 1.0).abs() < 1e-12);
        assert!(matches!(
            EllipticSolution::new(CaseTag::TransSn, model.clone(), edge),
            Err(Error::Range { .. })
        ));
        match EllipticSolution::new(CaseTag::TransSn, model, 1.01 * edge) {
            Err(Error::Range { gate }) => assert!(gate.contains("A ≤")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn window_violation_names_gate() {
        let (model, a) = ClosedFormModel::reference(CaseTag::TransCn);
        match EllipticSolution::new(CaseTag::TransDn, model, a) {
            Err(Error::Range { gate }) => assert_eq!(gate, "ω² < 0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_reference_cases_satisfy_their_equations() {
        for case in CaseTag::ALL {
            let sol = reference(case);
            let spec = sol.system_spec().unwrap();
            let grid = period_grid(&sol, 10.0, 1000).unwrap();
            let r = residual_check(&sol, &spec, &grid).unwrap();
            assert!(r.max_residual < RESIDUAL_TOLERANCE, "{case}: {r:?}");
            assert!(
                r.light_cone_residual.is_none_or(|e| e < RESIDUAL_TOLERANCE),
                "{case}: {r:?}"
            );
        }
    }

    #[test]
    fn corrupted_frequency_is_detected() {
        let mut sol = reference(CaseTag::TransCn);
        sol.omega *= 1.01;
        let spec = sol.system_spec().unwrap();
        let grid = period_grid(&sol, 10.0, 1000).unwrap();
        assert!(residual_check(&sol, &spec, &grid).unwrap().max_residual > 1e-2);
    }

    #[test]
    fn printed_antiderivatives_match_quadrature() {
        for case in CaseTag::ALL {
            let gap = reference(case).antiderivative_crosscheck(64).unwrap();
            assert!(gap < 1e-10, "{case}: {gap}");
        }
    }

    #[test]
    fn rot_one_angle_is_linear() {
        let sol = reference(CaseTag::RotI);
        for t in [0.5, 3.0, 7.25] {
            let th = sol.rot_point(t).unwrap()[1];
            assert!((th - 0.3 * t).abs() < 1e-13);
        }
    }

    #[test]
    fn rot_two_cn_is_periodic() {
        let sol = reference(CaseTag::RotIICn);
        let period = sol.period().unwrap();
        for t in [0.1, 1.3, 2.9] {
            let a = sol.x_coords(t).unwrap();
            let b = sol.x_coords(t + period).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn gain_off_angle_is_frozen() {
        let (model, a) = ClosedFormModel::reference(CaseTag::RotIICn);
        let model = match model {
            ClosedFormModel::Rotational(p) => {
                ClosedFormModel::Rotational(RotationalParams { gamma: 0.0, ..p })
            }
            m => m,
        };
        let sol = EllipticSolution::new(CaseTag::RotIICn, model, a).unwrap();
        let [_, th, x1, x2] = sol.rot_point(2.3).unwrap();
        assert_eq!(th, 0.0);
        assert!((x1 - x2).abs() < 1e-15);
    }

    #[test]
    fn case_tags_round_trip() {
        for c in CaseTag::ALL {
            assert_eq!(c.as_str().parse::<CaseTag>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
        }
    }

    #[test]
    fn stability_examples() {
        let (m, a) = ClosedFormModel::reference(CaseTag::RotIICn);
        assert!(
            stability_gate(CaseTag::RotIICn, &m, a, 0.0)
                .unwrap()
                .bounded
        );
        let (m, a) = ClosedFormModel::reference(CaseTag::RotI);
        assert!(!stability_gate(CaseTag::RotI, &m, a, 0.0).unwrap().bounded);
        let (m, a) = ClosedFormModel::reference(CaseTag::TransCn);
        assert!(
            stability_gate(CaseTag::TransCn, &m, a, 0.0)
                .unwrap()
                .bounded
        );
        let v = stability_gate(CaseTag::TransCn, &m, a, 1.0).unwrap();
        assert_eq!(v.method, "integration");
        assert!(!v.bounded);
    }

    #[test]
    fn scan_flips_at_the_window_edge() {
        let (base, a) = ClosedFormModel::reference(CaseTag::TransCn);
        let edge = 2f64.sqrt();
        for (gamma, inside) in [
            (0.9 * edge, true),
            (1.1 * edge, false),
            (-1.1 * edge, false),
        ] {
            let mut m = base.clone();
            m.set("gamma", gamma).unwrap();
            m.make_cubic_free();
            let pt = scan_point(CaseTag::TransCn, &m, a, 0.0).unwrap();
            assert_eq!(pt.gate.is_none(), inside, "{gamma}: {:?}", pt.gate);
            assert_eq!(
                pt.verdict.method,
                if inside { "closed_form" } else { "integration" }
            );
        }
    }
}

#[cfg(test)]
mod convention_tests {
    use super::*;

    #[test]
    fn exactly_one_reading_survives() {
        for case in [CaseTag::TransCn, CaseTag::TransDn, CaseTag::RotIISn] {
            let (m, a) = ClosedFormModel::reference(case);
            let rep = convention_report(case, &m, a).unwrap();
            assert_eq!(rep.passing.len(), 1, "{case}: {:#?}", rep.variants);
            assert!(rep.passing[0].starts_with("k is the modulus"));
        }
    }
}

#[cfg(test)]
mod integration_tests {
    use super::*;

    #[test]
    fn closed_forms_track_the_integrator() {
        let cfg = IntegratorConfig {
            rtol: 1e-12,
            atol: 1e-13,
            ..Default::default()
        };
        for case in [
            CaseTag::TransCn,
            CaseTag::TransCn2,
            CaseTag::RotIICn,
            CaseTag::RotIISn,
        ] {
            let (m, a) = ClosedFormModel::reference(case);
            let sol = EllipticSolution::new(case, m, a).unwrap();
            let dev = integration_deviation(&sol, 3.0, &cfg).unwrap();
            assert!(dev < 1e-7, "{case}: {dev}");
        }
    }
}
