//! Command-line front end: `simulate`, `verify`, `scan` and `qes`.
//!
//! Exit codes: [`EXIT_OK`] on success, [`EXIT_FAILED`] when a verification
//! suite fails, [`EXIT_USAGE`] for configuration errors and
//! [`EXIT_BLOW_UP`] when an integration diverges.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::closed_forms::{self, CaseTag, ClosedFormModel};
use crate::config::{Axis, ModelConfig, RunConfig, ScanConfig};
use crate::dynamics::{self, Trajectory};
use crate::error::FailureKind;
use crate::invariants::{self, gauge_equivalence, involution_suite};
use crate::models::{
    calogero_unidirectional, quartic_translational, rotational_model, CalogeroParams,
    QuarticTranslationalParams, RotationalParams, SexticQesParams,
};
use crate::ode::{IntegratorConfig, Stats};
use crate::qes;
use crate::rep::{build_matrix_rep, Direction};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;

/// Tolerance of the structural identities.
pub const STRUCTURE_TOLERANCE: f64 = 1e-12;
/// Perturbation added to `D` by `--inject-fault structural`.
pub const FAULT_SIZE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "gainloss",
    version,
    about = "Balanced gain-loss oscillator toolkit"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a model and write its trajectory and invariant drifts.
    Simulate(SimulateArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
    /// Sweep model parameters and classify each grid point.
    Scan(ScanArgs),
    /// Solve the sextic quasi-exactly solvable problem.
    Qes(QesArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Catalog model name (parameters come from the config file).
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub output_dt: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Trajectory CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON path; stdout when absent.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Perturb the diagonal matrix `D`.
    Structural,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Report a single closed-form case.
    #[arg(long)]
    pub case: Option<CaseTag>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long, value_enum)]
    pub inject_fault: Option<Fault>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub case: Option<CaseTag>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Translational charge.
    #[arg(long)]
    pub pi: Option<f64>,
    /// Axis as `name=min:max:steps`; repeat for a multi-dimensional grid.
    #[arg(long = "axis", value_parser = parse_axis)]
    pub axes: Vec<Axis>,
    /// Keep `α₀` fixed instead of re-deriving the cubic-free value.
    #[arg(long)]
    pub keep_alpha0: bool,
    /// Grid CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QesArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<u8>,
    #[arg(long, allow_hyphen_values = true)]
    pub atilde: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub btilde: Option<f64>,
    /// Wavefunction CSV path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_axis(s: &str) -> std::result::Result<Axis, String> {
    let (name, range) = s.split_once('=').ok_or("expected name=min:max:steps")?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err("expected name=min:max:steps".into());
    }
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok(Axis {
        param: name.trim().to_string(),
        min: num(parts[0])?,
        max: num(parts[1])?,
        steps: parts[2]
            .trim()
            .parse()
            .map_err(|e| format!("{:?}: {e}", parts[2]))?,
    })
}

/// Runs a parsed command line; the returned value is the process exit code.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Simulate(a) => simulate(cfg, a, stdout),
        Command::Verify(a) => verify(cfg, a, stdout),
        Command::Scan(a) => scan(cfg, a, stdout),
        Command::Qes(a) => qes_command(cfg, a, stdout),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            let mut f = create(p)?;
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None => writeln!(stdout, "{text}")?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Growth {
    pub coordinate: String,
    pub sup_first_half: f64,
    pub sup_second_half: f64,
    pub bounded: bool,
}

#[derive(Debug, Serialize)]
pub struct BlowUp {
    pub kind: FailureKind,
    pub t: f64,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary {
    pub model: String,
    pub t_end: f64,
    pub reached: f64,
    pub samples: usize,
    pub stats: Stats,
    pub drifts: BTreeMap<String, f64>,
    pub growth: Vec<Growth>,
    pub blow_up: Option<BlowUp>,
    pub trajectory: Option<PathBuf>,
}

/// Particle-frame sup norms over the two halves of a trajectory; growth by
/// more than 5% marks a coordinate unbounded.
pub fn growth(traj: &Trajectory) -> Result<Vec<Growth>> {
    let n = traj.states.len();
    let Some(first) = traj.states.first() else {
        return Ok(Vec::new());
    };
    let dim = first.q.len();
    let mut s1 = vec![0.0f64; dim];
    let mut s2 = vec![0.0f64; dim];
    for (k, s) in traj.states.iter().enumerate() {
        let x = dynamics::to_x(s)?;
        let target = if 2 * k < n { &mut s1 } else { &mut s2 };
        for (d, v) in x.q.iter().enumerate() {
            target[d] = target[d].max(v.abs());
        }
    }
    Ok((0..dim)
        .map(|d| Growth {
            coordinate: format!("x{}", d + 1),
            sup_first_half: s1[d],
            sup_second_half: s2[d],
            bounded: s2[d] <= 1.05 * s1[d] + 1e-9 * s1[d].max(1.0),
        })
        .collect())
}

fn simulate(mut cfg: RunConfig, a: SimulateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut model = cfg.model();
    if let Some(name) = a.model {
        if name != model.name {
            model = ModelConfig {
                name,
                params: Default::default(),
            };
        }
    }
    if let Some(t) = a.t_end {
        cfg.simulate.t_end = t;
    }
    if let Some(dt) = a.output_dt {
        cfg.integrator.output_dt = dt;
    }
    if let Some(r) = a.rtol {
        cfg.integrator.rtol = r;
    }
    cfg.integrator.validate()?;
    let built = model.build()?;
    let spec = built.spec;
    let init = cfg
        .initial
        .as_ref()
        .ok_or_else(|| Error::Config("simulate needs an [initial] table".into()))?
        .state(&spec)?;
    let (mut traj, failure) =
        match dynamics::integrate(&spec, &init, &cfg.integrator, cfg.simulate.t_end) {
            Ok(t) => (t, None),
            Err(Error::Integration(f)) => {
                let f = *f;
                (
                    f.partial,
                    Some(BlowUp {
                        kind: f.kind,
                        t: f.t,
                        message: f.message,
                    }),
                )
            }
            Err(e) => return Err(e),
        };
    if cfg.simulate.invariants {
        invariants::log_invariants(&spec, &mut traj)?;
    }
    let path = a
        .out
        .or(cfg.output.trajectory)
        .unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    let mut f = create(&path)?;
    traj.write_csv(&mut f)?;
    f.flush()?;
    let drifts = traj
        .invariants
        .as_ref()
        .map(|l| l.drifts().into_iter().collect())
        .unwrap_or_default();
    let code = match &failure {
        None => EXIT_OK,
        Some(b) if b.kind == FailureKind::BlowUp => EXIT_BLOW_UP,
        Some(_) => EXIT_FAILED,
    };
    let summary = SimulationSummary {
        model: spec.name.clone(),
        t_end: cfg.simulate.t_end,
        reached: traj.last().map_or(init.t, |s| s.t),
        samples: traj.len(),
        stats: traj.stats,
        drifts,
        growth: growth(&traj)?,
        blow_up: failure,
        trajectory: Some(path),
    };
    emit_json(
        &summary,
        a.summary.or(cfg.output.summary).as_deref(),
        stdout,
    )?;
    Ok(code)
}

#[derive(Debug, Serialize)]
pub struct Suite {
    pub name: &'static str,
    pub pass: bool,
    pub detail: Value,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub fault: Option<&'static str>,
    pub suites: Vec<Suite>,
    pub pass: bool,
}

/// Structural identities for the three catalog gain profiles.
pub fn structural_suite(samples: usize, seed: u64, fault: bool) -> Result<Suite> {
    let specs = [
        quartic_translational(&QuarticTranslationalParams {
            b: 0.4,
            pairs: 2,
            ..Default::default()
        })?,
        rotational_model(&RotationalParams {
            pairs: 2,
            ..Default::default()
        })?,
        calogero_unidirectional(&CalogeroParams::default())?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut detail = Vec::new();
    let mut pass = true;
    for spec in &specs {
        let mut worst: BTreeMap<String, f64> = BTreeMap::new();
        let mut ok = true;
        for _ in 0..samples {
            let x: Vec<f64> = (0..spec.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut rep = build_matrix_rep(spec, &x)?;
            if fault {
                rep.inject_fault(FAULT_SIZE);
            }
            let r = rep.verify_structure(STRUCTURE_TOLERANCE);
            ok &= r.pass;
            for c in r.checks {
                let e = worst.entry(c.name.to_string()).or_insert(0.0);
                *e = e.max(c.max_deviation);
            }
        }
        pass &= ok;
        detail.push(
            json!({"model": spec.name, "samples": samples, "max_deviation": worst, "pass": ok}),
        );
    }
    Ok(Suite {
        name: "structural",
        pass,
        detail: json!({"tolerance": STRUCTURE_TOLERANCE, "profiles": detail}),
    })
}

pub fn involution_suites(samples: usize, seed: u64, pairs: &[usize]) -> Result<Suite> {
    let mut reports = Vec::new();
    for &m in pairs {
        let trans = quartic_translational(&QuarticTranslationalParams {
            b: 0.4,
            alpha0: 0.3,
            pairs: m,
            coupling: 0.25,
            ..Default::default()
        })?;
        let rot = rotational_model(&RotationalParams {
            pairs: m,
            coupling: 0.2,
            ..Default::default()
        })?;
        reports.push(involution_suite(&trans, samples, seed)?);
        reports.push(involution_suite(&rot, samples, seed)?);
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(Suite {
        name: "involution",
        pass,
        detail: serde_json::to_value(reports)?,
    })
}

pub fn gauge_suite() -> Result<Suite> {
    let mut reports = Vec::new();
    for (direction, beta0) in [(Direction::CyclicPlus, 1.0), (Direction::CyclicMinus, -1.0)] {
        let p = QuarticTranslationalParams {
            b: 0.3,
            beta0,
            direction,
            ..Default::default()
        };
        let spec = quartic_translational(&p)?;
        let s = dynamics::PhaseState::new(0.0, vec![0.4, 0.1], vec![0.0, 0.6], dynamics::Coords::Z);
        reports.push(gauge_equivalence(
            &spec,
            &s,
            &IntegratorConfig::default(),
            3.0,
        )?);
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(Suite {
        name: "gauge_equivalence",
        pass,
        detail: serde_json::to_value(reports)?,
    })
}

pub fn closed_form_suite() -> Result<Suite> {
    let reports: Vec<closed_forms::ClosedFormReport> = CaseTag::ALL
        .par_iter()
        .map(|&case| {
            let (model, a) = ClosedFormModel::reference(case);
            closed_forms::closed_form_report(case, &model, a)
        })
        .collect::<Result<_>>()?;
    let pass = reports.iter().all(|r| r.pass);
    Ok(Suite {
        name: "closed_forms",
        pass,
        detail: serde_json::to_value(reports)?,
    })
}

/// Low-level anchors: `E = 0` for `n = 0`, the closed form for `n = 1`, and
/// real-axis normalisability by the sign of `ã`.
pub fn qes_suite() -> Result<Suite> {
    let mut checks = Vec::new();
    let mut pass = true;
    for (at, bt, p) in [(1.0, 0.0, 0u8), (0.7, -0.5, 1), (2.0, 1.5, 0)] {
        let r0 = qes::solve(&SexticQesParams::new(at, bt, 0, p)?)?;
        let e0 = r0.levels[0].energy;
        let ok0 = e0.re == 0.0 && e0.im == 0.0 && r0.pass;
        let r1 = qes::solve(&SexticQesParams::new(at, bt, 1, p)?)?;
        let root = (bt * bt + 2.0 * (1.0 + 2.0 * f64::from(p)) * at).sqrt();
        let want = [-2.0 * bt - 2.0 * root, -2.0 * bt + 2.0 * root];
        let gap = r1
            .levels
            .iter()
            .zip(want)
            .map(|(l, w)| (l.energy.re - w).abs() + l.energy.im.abs())
            .fold(0.0, f64::max);
        let ok1 = gap < 1e-10 && r1.pass && r1.levels.iter().all(|l| l.norm.is_finite());
        pass &= ok0 && ok1;
        checks.push(json!({"atilde": at, "btilde": bt, "p": p, "n0_energy": e0.re, "n0_pass": ok0,
            "n1_energies": r1.levels.iter().map(|l| l.energy.re).collect::<Vec<_>>(), "n1_gap": gap, "n1_pass": ok1}));
    }
    let neg = qes::build_recursion_matrix(&SexticQesParams::new(-1.0, 0.0, 0, 0)?)?;
    let divergent = !qes::norm_check(&neg, &[num_complex::Complex64::new(1.0, 0.0)]).is_finite();
    pass &= divergent;
    checks.push(json!({"atilde": -1.0, "divergent": divergent}));
    Ok(Suite {
        name: "qes",
        pass,
        detail: json!(checks),
    })
}

fn verify(cfg: RunConfig, a: VerifyArgs, stdout: &mut dyn Write) -> Result<i32> {
    let seed = a.seed.unwrap_or(cfg.seed);
    let samples = a.samples.unwrap_or(cfg.verify.samples);
    let report_path = a.report.or(cfg.output.report.clone());
    if let Some(case) = a.case.or(cfg.verify.case) {
        let (reference, ref_amp) = ClosedFormModel::reference(case);
        let model = match cfg
            .model
            .as_ref()
            .map(|m| m.closed_form())
            .transpose()?
            .flatten()
        {
            Some(m) => m,
            None => reference,
        };
        let amplitude = a.amplitude.or(cfg.verify.amplitude).unwrap_or(ref_amp);
        let report = closed_forms::closed_form_report(case, &model, amplitude)?;
        emit_json(&report, report_path.as_deref(), stdout)?;
        return Ok(if report.pass { EXIT_OK } else { EXIT_FAILED });
    }
    let fault = a.inject_fault == Some(Fault::Structural);
    let suites = vec![
        structural_suite(samples, seed, fault)?,
        involution_suites(samples, seed, &cfg.verify.pairs)?,
        gauge_suite()?,
        closed_form_suite()?,
        qes_suite()?,
    ];
    let pass = suites.iter().all(|s| s.pass);
    let report = VerifyReport {
        seed,
        fault: fault.then_some("structural"),
        suites,
        pass,
    };
    emit_json(&report, report_path.as_deref(), stdout)?;
    Ok(if pass { EXIT_OK } else { EXIT_FAILED })
}

/// One CSV row of a scan, in grid order.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub index: usize,
    pub values: Vec<f64>,
    pub outcome: std::result::Result<closed_forms::ScanPoint, String>,
}

/// Evaluates the cartesian grid of `scan.axes`, first axis slowest.
pub fn run_scan(base: &ClosedFormModel, scan: &ScanConfig) -> Result<Vec<ScanRow>> {
    let axes: Vec<Vec<f64>> = scan.axes.iter().map(Axis::values).collect();
    let total: usize = axes.iter().map(Vec::len).product();
    if scan.axes.is_empty() || total == 0 {
        return Err(Error::Config("scan grid is empty".into()));
    }
    // reject unknown parameter names before the sweep
    let mut probe = base.clone();
    for axis in &scan.axes {
        probe.set(&axis.param, axis.min)?;
    }
    Ok((0..total)
        .into_par_iter()
        .map(|index| {
            let mut rest = index;
            let mut values = vec![0.0; axes.len()];
            for d in (0..axes.len()).rev() {
                values[d] = axes[d][rest % axes[d].len()];
                rest /= axes[d].len();
            }
            let mut model = base.clone();
            let outcome = (|| {
                for (axis, &v) in scan.axes.iter().zip(&values) {
                    model.set(&axis.param, v)?;
                }
                if scan.cubic_free {
                    model.make_cubic_free();
                }
                closed_forms::scan_point(scan.case, &model, scan.amplitude, scan.pi)
            })()
            .map_err(|e| e.to_string());
            ScanRow {
                index,
                values,
                outcome,
            }
        })
        .collect())
}

pub fn write_scan_csv<W: Write>(scan: &ScanConfig, rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(scan.axes.iter().map(|a| a.param.clone()));
    header.extend(
        [
            "omega_sq",
            "beta",
            "in_window",
            "gate",
            "method",
            "bounded",
            "sup_first_half",
            "sup_second_half",
            "blow_up_time",
            "recorded_stable",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(r.values.iter().map(f64::to_string));
        match &r.outcome {
            Ok(p) => {
                let v = &p.verdict;
                let s1 = v.sup_first_half.iter().copied().fold(0.0, f64::max);
                let s2 = v.sup_second_half.iter().copied().fold(0.0, f64::max);
                rec.extend([
                    p.omega_sq.to_string(),
                    p.beta.to_string(),
                    p.gate.is_none().to_string(),
                    p.gate.clone().unwrap_or_default(),
                    v.method.to_string(),
                    v.bounded.to_string(),
                    s1.to_string(),
                    s2.to_string(),
                    v.blow_up_time.map(|t| t.to_string()).unwrap_or_default(),
                    v.recorded_stable.map(|b| b.to_string()).unwrap_or_default(),
                    String::new(),
                ]);
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 10));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn scan(cfg: RunConfig, a: ScanArgs, stdout: &mut dyn Write) -> Result<i32> {
    let case = a
        .case
        .or(cfg.scan.as_ref().map(|s| s.case))
        .unwrap_or(CaseTag::TransCn);
    let (reference, ref_amp) = ClosedFormModel::reference(case);
    let mut scan = cfg.scan.clone().unwrap_or(ScanConfig {
        case,
        amplitude: ref_amp,
        pi: 0.0,
        cubic_free: true,
        axes: Vec::new(),
    });
    scan.case = case;
    if let Some(v) = a.amplitude {
        scan.amplitude = v;
    }
    if let Some(v) = a.pi {
        scan.pi = v;
    }
    if a.keep_alpha0 {
        scan.cubic_free = false;
    }
    if !a.axes.is_empty() {
        scan.axes = a.axes;
    }
    let base = match cfg
        .model
        .as_ref()
        .map(|m| m.closed_form())
        .transpose()?
        .flatten()
    {
        Some(m) => m,
        None => reference,
    };
    let rows = run_scan(&base, &scan)?;
    match a.out.or(cfg.output.scan) {
        Some(p) => write_scan_csv(&scan, &rows, create(&p)?)?,
        None => write_scan_csv(&scan, &rows, &mut *stdout)?,
    }
    Ok(EXIT_OK)
}

fn energy_json(e: num_complex::Complex64, all_real: bool) -> Value {
    if all_real {
        json!(e.re)
    } else {
        json!([e.re, e.im])
    }
}

fn qes_command(cfg: RunConfig, a: QesArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut q = cfg.qes.clone();
    q.n = a.n.unwrap_or(q.n);
    q.p = a.p.unwrap_or(q.p);
    q.atilde = a.atilde.unwrap_or(q.atilde);
    q.btilde = a.btilde.unwrap_or(q.btilde);
    q.step = a.step.unwrap_or(q.step);
    q.half_width = a.half_width.or(q.half_width);
    let params = SexticQesParams::new(q.atilde, q.btilde, q.n, q.p)?;
    let report = qes::solve(&params)?;
    let out = json!({
        "params": params,
        "k1": report.k1,
        "E": report.levels.iter().map(|l| energy_json(l.energy, report.all_real)).collect::<Vec<_>>(),
        "normalizable": report.levels.iter().map(|l| l.norm.is_finite()).collect::<Vec<_>>(),
        "norms": report.levels.iter().map(|l| serde_json::to_value(&l.norm)).collect::<std::result::Result<Vec<_>, _>>()?,
        "residual": report.max_residual,
        "residuals": report.levels.iter().map(|l| l.residual).collect::<Vec<_>>(),
        "coefficients": report.levels.iter().map(|l| l.coefficients.iter().map(|c| energy_json(*c, report.all_real)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "methods_agree": report.methods_agree,
        "method_disagreement": report.disagreement,
        "near_degenerate": report.near_degenerate,
        "stokes_wedges": report.stokes_wedges,
        "pass": report.pass,
    });
    if let Some(path) = a.csv.or(cfg.output.wavefunction) {
        let problem = qes::build_recursion_matrix(&params)?;
        let half = q.half_width.unwrap_or_else(|| qes::default_extent(&params));
        if !(q.step > 0.0 && half > 0.0) {
            return Err(Error::Config(
                "wavefunction grid needs positive step and half-width".into(),
            ));
        }
        let steps = (half / q.step).round() as i64;
        let grid: Vec<f64> = (-steps..=steps).map(|k| k as f64 * q.step).collect();
        let mut w = csv::Writer::from_writer(create(&path)?);
        let mut header = vec!["z".to_string()];
        for k in 0..report.levels.len() {
            header.push(format!("phi{k}_re"));
            header.push(format!("phi{k}_im"));
        }
        w.write_record(&header)?;
        let columns: Vec<_> = report
            .levels
            .iter()
            .map(|l| qes::wavefunction(&problem, &l.coefficients, &grid))
            .collect();
        for (i, z) in grid.iter().enumerate() {
            let mut rec = vec![z.to_string()];
            for col in &columns {
                rec.push(col[i].re.to_string());
                rec.push(col[i].im.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    emit_json(&out, a.report.as_deref(), stdout)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILED })
}

/// Exit code for an error raised before a command could finish.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Integration(f) if f.kind == FailureKind::BlowUp => EXIT_BLOW_UP,
        Error::Config(_) | Error::Parameter(_) | Error::Range { .. } | Error::Spec(_) => EXIT_USAGE,
        _ => EXIT_FAILED,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("gainloss").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn axis_syntax() {
        let a = parse_axis("gamma=-2:2:5").unwrap();
        assert_eq!(
            (a.param.as_str(), a.min, a.max, a.steps),
            ("gamma", -2.0, 2.0, 5)
        );
        assert!(parse_axis("gamma=1:2").is_err());
    }

    #[test]
    fn qes_command_emits_energies() {
        let mut out = Vec::new();
        let code = run(
            cli(&[
                "qes", "--n", "1", "--p", "0", "--atilde", "1", "--btilde", "0",
            ]),
            &mut out,
        )
        .unwrap();
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_slice(&out).unwrap();
        let e: Vec<f64> = serde_json::from_value(v["E"].clone()).unwrap();
        let r = 8f64.sqrt();
        assert!((e[0] + r).abs() < 1e-12 && (e[1] - r).abs() < 1e-12);
        assert_eq!(v["normalizable"], json!([true, true]));
    }

    #[test]
    fn single_point_scan() {
        let mut out = Vec::new();
        let code = run(
            cli(&["scan", "--case", "trans-cn", "--axis", "gamma=0.5:0.5:1"]),
            &mut out,
        )
        .unwrap();
        assert_eq!(code, EXIT_OK);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .contains(",true,,closed_form,true,"));
    }

    #[test]
    fn empty_scan_is_an_error() {
        let mut out = Vec::new();
        assert!(run(cli(&["scan", "--axis", "gamma=0:1:0"]), &mut out).is_err());
        assert!(run(cli(&["scan", "--axis", "nope=0:1:2"]), &mut out).is_err());
    }

    #[test]
    fn fault_injection_fails_structure() {
        assert!(structural_suite(5, 1, false).unwrap().pass);
        assert!(!structural_suite(5, 1, true).unwrap().pass);
    }
}
