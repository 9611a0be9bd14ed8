//! Explicit Runge-Kutta integration of first-order systems `y' = f(t, y)`.
//!
//! Steps are shortened so that every output time is hit exactly; the step
//! size proposed by the controller is kept for the following step.

use serde::{Deserialize, Serialize};

use crate::error::FailureKind;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dormand-Prince 5(4) with local error control.
    #[default]
    DormandPrince54,
    /// Classical fixed-step fourth-order Runge-Kutta.
    Rk4,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size (adaptive) or the step size (fixed).
    pub max_step: f64,
    /// Spacing of the output grid.
    pub output_dt: f64,
    /// Keep every `stride`-th output grid point.
    pub stride: usize,
    pub max_steps: usize,
    /// Any state entry above this magnitude is treated as a blow-up.
    pub blow_up: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::DormandPrince54,
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.1,
            output_dt: 0.1,
            stride: 1,
            max_steps: 20_000_000,
            blow_up: 1e12,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed(step: f64, output_dt: f64) -> Self {
        Self {
            method: Method::Rk4,
            max_step: step,
            output_dt,
            ..Self::default()
        }
    }

    pub fn with_output(mut self, output_dt: f64) -> Self {
        self.output_dt = output_dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(crate::Error::Config(what.to_string()));
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return bad("max_step must be positive and finite");
        }
        if !(self.output_dt > 0.0 && self.output_dt.is_finite()) {
            return bad("output_dt must be positive and finite");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        if !(self.blow_up > 0.0) {
            return bad("blow_up threshold must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Reason an integration stopped before reaching its end time.
#[derive(Debug, Clone)]
pub struct Halt {
    pub kind: FailureKind,
    pub t: f64,
    pub message: String,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Grid {
    t0: f64,
    dt: f64,
    t_end: f64,
    k: usize,
}

impl Grid {
    fn time(&self, k: usize) -> f64 {
        (self.t0 + k as f64 * self.dt).min(self.t_end)
    }

    fn next(&self) -> f64 {
        self.time(self.k + 1)
    }

    fn is_last(&self, t: f64) -> bool {
        t >= self.t_end
    }
}

/// Integrates `f` from `(t0, y0)` to `t_end`, calling `observe(t, y, f(t, y))`
/// at the initial time and every kept output time.
pub fn solve<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    mut observe: O,
) -> (Stats, Option<Halt>)
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64], &[f64]),
{
    let n = y0.len();
    let mut stats = Stats::default();
    let halt = |kind, t, message: String| Some(Halt { kind, t, message });

    let mut y = y0.to_vec();
    let mut dy = vec![0.0; n];
    if let Err(e) = f(t0, &y, &mut dy) {
        return (stats, halt(FailureKind::Evaluation, t0, e.to_string()));
    }
    stats.evaluations += 1;
    if let Some(bad) = check_state(&y, &dy, cfg.blow_up) {
        return (stats, halt(bad.0, t0, bad.1));
    }
    observe(t0, &y, &dy);
    if t_end <= t0 {
        return (stats, None);
    }

    let mut grid = Grid {
        t0,
        dt: cfg.output_dt,
        t_end,
        k: 0,
    };
    let mut t = t0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut dynew = vec![0.0; n];
    let mut err = vec![0.0; n];

    let adaptive = cfg.method == Method::DormandPrince54;
    let mut h = if adaptive {
        initial_step(&mut f, t0, &y, &dy, cfg, &mut stats).min(cfg.max_step)
    } else {
        cfg.max_step
    };
    if !(h > 0.0) || !h.is_finite() {
        h = cfg.max_step.min(cfg.output_dt);
    }

    loop {
        if stats.steps + stats.rejected >= cfg.max_steps {
            return (
                stats,
                halt(
                    FailureKind::TooManySteps,
                    t,
                    format!("exceeded {} steps", cfg.max_steps),
                ),
            );
        }
        let target = grid.next();
        let remaining = target - t;
        let lands = h >= remaining * (1.0 - 1e-12);
        let step = if lands { remaining } else { h };
        if step <= 1e-14 * t.abs().max(1.0) && !lands {
            return (
                stats,
                halt(
                    FailureKind::StepUnderflow,
                    t,
                    format!("step size {step:e} underflowed"),
                ),
            );
        }

        let accepted;
        if adaptive {
            let eval = dp_stage(
                &mut f, t, &y, &dy, step, &mut k, &mut ytmp, &mut ynew, &mut dynew, &mut err,
            );
            stats.evaluations += 6;
            let norm = match eval {
                Ok(()) => error_norm(&err, &y, &ynew, cfg),
                Err(_) => f64::NAN,
            };
            if norm.is_finite() && norm <= 1.0 {
                accepted = true;
                let fac = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !lands || step >= h {
                    h = (step * fac).min(cfg.max_step);
                } else {
                    // keep the unclamped proposal when the step was shortened
                    h = h.max(step * fac).min(cfg.max_step);
                }
            } else {
                accepted = false;
                stats.rejected += 1;
                let fac = if norm.is_finite() {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 1.0)
                } else {
                    0.2
                };
                h = step * fac;
                if h <= 1e-14 * t.abs().max(1.0) {
                    let kind = if norm.is_finite() {
                        FailureKind::StepUnderflow
                    } else {
                        FailureKind::NonFinite
                    };
                    let message = match eval {
                        Err(e) => e.to_string(),
                        Ok(()) => format!("step size {h:e} underflowed"),
                    };
                    return (stats, halt(kind, t, message));
                }
            }
        } else {
            if let Err(e) = rk4_stage(&mut f, t, &y, &dy, step, &mut k, &mut ytmp, &mut ynew) {
                return (stats, halt(FailureKind::Evaluation, t, e.to_string()));
            }
            stats.evaluations += 3;
            if let Err(e) = f(t + step, &ynew, &mut dynew) {
                return (
                    stats,
                    halt(FailureKind::Evaluation, t + step, e.to_string()),
                );
            }
            stats.evaluations += 1;
            accepted = true;
        }

        if !accepted {
            continue;
        }
        stats.steps += 1;
        t = if lands { target } else { t + step };
        std::mem::swap(&mut y, &mut ynew);
        std::mem::swap(&mut dy, &mut dynew);
        if let Some(bad) = check_state(&y, &dy, cfg.blow_up) {
            return (stats, halt(bad.0, t, bad.1));
        }
        if lands {
            grid.k += 1;
            let last = grid.is_last(t);
            if last || grid.k.is_multiple_of(cfg.stride) {
                observe(t, &y, &dy);
            }
            if last {
                return (stats, None);
            }
        }
    }
}

fn check_state(y: &[f64], dy: &[f64], limit: f64) -> Option<(FailureKind, String)> {
    if y.iter().chain(dy).any(|v| !v.is_finite()) {
        return Some((FailureKind::NonFinite, "non-finite state".into()));
    }
    if let Some(v) = y.iter().find(|v| v.abs() > limit) {
        return Some((
            FailureKind::BlowUp,
            format!("state entry {v:e} exceeds {limit:e}"),
        ));
    }
    None
}

fn error_norm(err: &[f64], y: &[f64], ynew: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y.iter().zip(ynew))
        .map(|(e, (a, b))| {
            let sc = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y: &[f64],
    dy: &[f64],
    cfg: &IntegratorConfig,
    stats: &mut Stats,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let scale: Vec<f64> = y.iter().map(|v| cfg.atol + cfg.rtol * v.abs()).collect();
    let rms = |v: &[f64]| {
        (v.iter()
            .zip(&scale)
            .map(|(a, s)| (a / s).powi(2))
            .sum::<f64>()
            / v.len().max(1) as f64)
            .sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(dy);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(dy).map(|(a, b)| a + h0 * b).collect();
    let mut dy1 = vec![0.0; y.len()];
    if f(t0 + h0, &y1, &mut dy1).is_err() {
        return h0;
    }
    stats.evaluations += 1;
    let diff: Vec<f64> = dy1.iter().zip(dy).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[allow(clippy::too_many_arguments)]
fn dp_stage<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    dy: &[f64],
    h: f64,
    k: &mut [Vec<f64>],
    ytmp: &mut [f64],
    ynew: &mut [f64],
    dynew: &mut [f64],
    err: &mut [f64],
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    k[0].copy_from_slice(dy);
    for i in 0..n {
        ytmp[i] = y[i] + h * A21 * k[0][i];
    }
    f(t + C2 * h, ytmp, &mut k[1])?;
    for i in 0..n {
        ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
    }
    f(t + C3 * h, ytmp, &mut k[2])?;
    for i in 0..n {
        ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
    }
    f(t + C4 * h, ytmp, &mut k[3])?;
    for i in 0..n {
        ytmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
    }
    f(t + C5 * h, ytmp, &mut k[4])?;
    for i in 0..n {
        ytmp[i] = y[i]
            + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
    }
    f(t + h, ytmp, &mut k[5])?;
    for i in 0..n {
        ynew[i] =
            y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
    }
    f(t + h, ynew, dynew)?;
    for i in 0..n {
        err[i] = h
            * (E1 * k[0][i]
                + E3 * k[2][i]
                + E4 * k[3][i]
                + E5 * k[4][i]
                + E6 * k[5][i]
                + E7 * dynew[i]);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn rk4_stage<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    dy: &[f64],
    h: f64,
    k: &mut [Vec<f64>],
    ytmp: &mut [f64],
    ynew: &mut [f64],
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    k[0].copy_from_slice(dy);
    for i in 0..n {
        ytmp[i] = y[i] + 0.5 * h * k[0][i];
    }
    f(t + 0.5 * h, ytmp, &mut k[1])?;
    for i in 0..n {
        ytmp[i] = y[i] + 0.5 * h * k[1][i];
    }
    f(t + 0.5 * h, ytmp, &mut k[2])?;
    for i in 0..n {
        ytmp[i] = y[i] + h * k[2][i];
    }
    f(t + h, ytmp, &mut k[3])?;
    for i in 0..n {
        ynew[i] = y[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
    Ok(())
}

/// Cubic Hermite interpolation on `[t0, t1]` from values and slopes.
pub fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y0;
    }
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = y[1];
        dy[1] = -y[0];
        Ok(())
    }

    fn run(cfg: &IntegratorConfig, t_end: f64) -> (Vec<(f64, Vec<f64>)>, Stats, Option<Halt>) {
        let mut out = Vec::new();
        let (stats, halt) = solve(oscillator, 0.0, &[1.0, 0.0], t_end, cfg, |t, y, _| {
            out.push((t, y.to_vec()))
        });
        (out, stats, halt)
    }

    #[test]
    fn adaptive_oscillator_accuracy() {
        let cfg = IntegratorConfig::default().with_output(0.5);
        let (out, stats, halt) = run(&cfg, 20.0 * std::f64::consts::PI);
        assert!(halt.is_none());
        assert!(stats.steps > 0);
        for (t, y) in &out {
            assert!((y[0] - t.cos()).abs() < 1e-8, "t={t}");
        }
        assert_eq!(out.last().unwrap().0, 20.0 * std::f64::consts::PI);
    }

    #[test]
    fn output_grid_is_hit_exactly() {
        let cfg = IntegratorConfig::default().with_output(0.25);
        let (out, _, _) = run(&cfg, 2.0);
        let times: Vec<f64> = out.iter().map(|s| s.0).collect();
        assert_eq!(times.len(), 9);
        for (i, t) in times.iter().enumerate() {
            assert_eq!(*t, 0.25 * i as f64);
        }
    }

    #[test]
    fn stride_thins_samples_but_keeps_end() {
        let mut cfg = IntegratorConfig::default().with_output(0.1);
        cfg.stride = 3;
        let (out, _, _) = run(&cfg, 1.0);
        assert_eq!(out.len(), 1 + 3 + 1);
        assert_eq!(out.last().unwrap().0, 1.0);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let e = |h: f64| {
            let (out, _, _) = run(&IntegratorConfig::fixed(h, 1.0), 1.0);
            (out.last().unwrap().1[0] - 1f64.cos()).abs()
        };
        let ratio = e(0.02) / e(0.01);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_detected() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0] * y[0];
            Ok(())
        };
        let (_, halt) = solve(
            f,
            0.0,
            &[1.0],
            2.0,
            &IntegratorConfig::default(),
            |_, _, _| {},
        );
        let halt = halt.expect("must halt");
        assert!(matches!(
            halt.kind,
            FailureKind::BlowUp | FailureKind::StepUnderflow
        ));
        assert!((halt.t - 1.0).abs() < 1e-3);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |t: f64| 1.0 + 2.0 * t - t * t + 0.5 * t * t * t;
        let dp = |t: f64| 2.0 - 2.0 * t + 1.5 * t * t;
        let v = hermite(0.3, 1.1, p(0.3), p(1.1), dp(0.3), dp(1.1), 0.77);
        assert!((v - p(0.77)).abs() < 1e-14);
    }
}
