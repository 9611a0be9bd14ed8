//! Sextic quasi-exactly solvable sector and the complex radial potential of
//! the rotational quantum problem.
//!
//! With `y = z²` the polynomial factor `Pₙ(y) = Σ cⱼ yʲ` of
//! `φ = zᵖ Pₙ(z²) exp(−b̃z²/2 − ãz⁴/4)` obeys
//!
//! ```text
//! −4y P'' + 2(2ãy² + 2b̃y − 1 − 2p) P' − 4ãn y P = −E P,
//! ```
//!
//! a finite tridiagonal system `T c = −E c`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::models::SexticQesParams;
use crate::poly::Polynomial;
use crate::quad::adaptive;
use crate::rep::RadialGain;
use crate::{Error, Result};

/// Relative tolerance for agreement between the two spectrum methods.
pub const METHOD_AGREEMENT_TOLERANCE: f64 = 1e-8;
/// Relative tolerance of the grid Schrödinger residual.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Grid spacing of the finite-difference residual.
pub const RESIDUAL_STEP: f64 = 0.01;
/// Largest half-width tried by the norm check.
pub const NORM_CUTOFF: f64 = 50.0;

pub const STOKES_WEDGE_NOTE: &str =
    "Normalisability off the real axis (Stokes wedges of opening angle π/4 \
about the imaginary axis) is not integrated numerically; only the real-axis norm is checked.";

#[derive(Debug, Clone, Serialize)]
pub struct QesProblem {
    pub params: SexticQesParams,
    /// `(n+1)×(n+1)` recursion matrix, row-major.
    pub matrix: Vec<Vec<f64>>,
    pub diagonal: Vec<f64>,
    /// `T[j][j+1]`.
    pub upper: Vec<f64>,
    /// `T[j][j−1]`, indexed by `j − 1`.
    pub lower: Vec<f64>,
    /// Plane-wave eigenvalue of the free direction.
    pub k1: f64,
}

impl QesProblem {
    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |i, j| self.matrix[i][j])
    }

    /// `det(T + E·1)` and its derivative by the continuant recursion.
    pub fn characteristic(&self, e: Complex64) -> (Complex64, Complex64) {
        let mut f_prev = Complex64::new(1.0, 0.0);
        let mut df_prev = Complex64::new(0.0, 0.0);
        let mut f = self.diagonal[0] + e;
        let mut df = Complex64::new(1.0, 0.0);
        for k in 1..self.size() {
            let d = self.diagonal[k] + e;
            let off = self.upper[k - 1] * self.lower[k - 1];
            let f_next = d * f - off * f_prev;
            let df_next = f + d * df - off * df_prev;
            f_prev = f;
            df_prev = df;
            f = f_next;
            df = df_next;
        }
        (f, df)
    }

    /// Characteristic polynomial `det(T + E·1)` in `E`.
    pub fn characteristic_polynomial(&self) -> Polynomial {
        let e = Polynomial::new(vec![0.0, 1.0]);
        let mut f_prev = Polynomial::new(vec![1.0]);
        let mut f = Polynomial::new(vec![self.diagonal[0], 1.0]);
        for k in 1..self.size() {
            let d = e.add(&Polynomial::new(vec![self.diagonal[k]]));
            let off = self.upper[k - 1] * self.lower[k - 1];
            let next = d.mul(&f).add(&f_prev.scale(-off));
            f_prev = f;
            f = next;
        }
        f
    }

    /// `|det(T + E·1)|` divided by the product of row scales.
    pub fn scaled_characteristic(&self, e: Complex64) -> f64 {
        let n = self.size();
        let mut scale = 1.0;
        for j in 0..n {
            let off = if j > 0 { self.lower[j - 1].abs() } else { 0.0 }
                + if j + 1 < n { self.upper[j].abs() } else { 0.0 };
            scale *= (self.diagonal[j].abs() + e.norm() + off).max(1.0);
        }
        self.characteristic(e).0.norm() / scale
    }
}

/// Applies the differential operator of the recursion to `P`.
fn recursion_operator(params: &SexticQesParams, p_poly: &Polynomial) -> Polynomial {
    let (at, bt) = (params.atilde, params.btilde);
    let p = f64::from(params.p);
    let y = Polynomial::new(vec![0.0, 1.0]);
    let d1 = p_poly.derivative();
    let d2 = d1.derivative();
    let drift = Polynomial::new(vec![-2.0 * (1.0 + 2.0 * p), 4.0 * bt, 4.0 * at]);
    y.mul(&d2)
        .scale(-4.0)
        .add(&drift.mul(&d1))
        .add(&y.mul(p_poly).scale(-4.0 * at * params.n as f64))
}

/// Builds `T` from its closed-form entries and checks every column against
/// the operator applied to the monomial `yᵏ`.
pub fn build_recursion_matrix(params: &SexticQesParams) -> Result<QesProblem> {
    params.validate()?;
    let n = params.n;
    let (at, bt) = (params.atilde, params.btilde);
    let p = f64::from(params.p);
    let diagonal: Vec<f64> = (0..=n).map(|j| 4.0 * bt * j as f64).collect();
    let upper: Vec<f64> = (0..n)
        .map(|j| -2.0 * (j as f64 + 1.0) * (2.0 * j as f64 + 1.0 + 2.0 * p))
        .collect();
    let lower: Vec<f64> = (1..=n)
        .map(|j| -4.0 * at * (n as f64 - j as f64 + 1.0))
        .collect();
    let mut matrix = vec![vec![0.0; n + 1]; n + 1];
    for j in 0..=n {
        matrix[j][j] = diagonal[j];
        if j < n {
            matrix[j][j + 1] = upper[j];
            matrix[j + 1][j] = lower[j];
        }
    }
    for k in 0..=n {
        let image = recursion_operator(params, &Polynomial::monomial(k, 1.0));
        let scale =
            1.0 + at.abs() * n as f64 + bt.abs() * n as f64 + 4.0 * (n as f64 + 1.0).powi(2);
        for (row, entries) in matrix.iter().enumerate().take(n + 2) {
            let want = entries[k];
            let got = image.coeff(row);
            if (want - got).abs() > 1e-13 * scale {
                return Err(Error::Spec(format!(
                    "recursion entry ({row}, {k}) is {want}, operator gives {got}"
                )));
            }
        }
        if image.coeff(n + 1).abs() > 1e-13 * scale {
            return Err(Error::Spec(format!(
                "operator maps y^{k} out of degree {n}"
            )));
        }
    }
    Ok(QesProblem {
        params: *params,
        matrix,
        diagonal,
        upper,
        lower,
        k1: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    Eigen,
    DeterminantRoots,
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub method: SpectrumMethod,
    /// Ascending by real part, then imaginary part.
    pub energies: Vec<Complex64>,
    /// `c` per energy, scaled so that `max |cⱼ| = 1`.
    pub coefficients: Vec<Vec<Complex64>>,
    /// Scaled `|det(T + E)|` per energy.
    pub characteristic_residual: Vec<f64>,
    /// Index pairs of nearly coincident energies.
    pub near_degenerate: Vec<(usize, usize)>,
}

impl Spectrum {
    pub fn all_real(&self) -> bool {
        self.energies
            .iter()
            .all(|e| e.im.abs() <= 1e-12 * e.norm().max(1.0))
    }

    pub fn real_energies(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e.re).collect()
    }
}

fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Null vector of `T + E` by forward recursion; the upper diagonal never
/// vanishes.
pub fn coefficients_for(problem: &QesProblem, e: Complex64) -> Vec<Complex64> {
    let n = problem.size();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    c[0] = Complex64::new(1.0, 0.0);
    for j in 0..n - 1 {
        let mut rhs = -(problem.diagonal[j] + e) * c[j];
        if j > 0 {
            rhs -= problem.lower[j - 1] * c[j - 1];
        }
        c[j + 1] = rhs / problem.upper[j];
    }
    let big = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let pivot = c
        .iter()
        .copied()
        .find(|x| x.norm() == big)
        .unwrap_or(Complex64::new(1.0, 0.0));
    // unit phase on the largest entry keeps real spectra real
    c.iter().map(|x| x / pivot).collect()
}

fn aberth(poly: &Polynomial) -> Vec<Complex64> {
    let deg = poly.degree();
    if deg == 0 {
        return Vec::new();
    }
    let lead = poly.coeff(deg);
    let monic: Vec<f64> = poly.coeffs().iter().map(|c| c / lead).collect();
    let radius = 1.0 + monic[..deg].iter().map(|c| c.abs()).fold(0.0, f64::max);
    let eval = |z: Complex64| {
        let mut f = Complex64::new(0.0, 0.0);
        let mut df = Complex64::new(0.0, 0.0);
        for &c in monic.iter().rev() {
            df = df * z + f;
            f = f * z + c;
        }
        (f, df)
    };
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            Complex64::from_polar(
                0.5 * radius,
                2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64,
            )
        })
        .collect();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for i in 0..deg {
            let (f, df) = eval(z[i]);
            if f.norm() == 0.0 {
                continue;
            }
            let ratio = f / df;
            let repulsion: Complex64 = (0..deg)
                .filter(|&j| j != i)
                .map(|j| 1.0 / (z[i] - z[j]))
                .sum();
            let step = ratio / (1.0 - ratio * repulsion);
            z[i] -= step;
            moved = moved.max(step.norm() / z[i].norm().max(1.0));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

fn finish(problem: &QesProblem, method: SpectrumMethod, mut energies: Vec<Complex64>) -> Spectrum {
    for e in energies.iter_mut() {
        if e.im.abs() <= 1e-12 * e.norm().max(1.0) {
            e.im = 0.0;
        }
    }
    sort_complex(&mut energies);
    let coefficients = energies
        .iter()
        .map(|&e| coefficients_for(problem, e))
        .collect();
    let characteristic_residual = energies
        .iter()
        .map(|&e| problem.scaled_characteristic(e))
        .collect();
    let mut near_degenerate = Vec::new();
    for i in 0..energies.len() {
        for j in i + 1..energies.len() {
            if (energies[i] - energies[j]).norm() < 1e-6 * energies[i].norm().max(1.0) {
                near_degenerate.push((i, j));
            }
        }
    }
    Spectrum {
        method,
        energies,
        coefficients,
        characteristic_residual,
        near_degenerate,
    }
}

/// Energies `E = −λ(T)` by one method.
pub fn spectrum_with(problem: &QesProblem, method: SpectrumMethod) -> Spectrum {
    let energies = match method {
        SpectrumMethod::Eigen => problem
            .dense()
            .complex_eigenvalues()
            .iter()
            .map(|l| -l)
            .collect(),
        SpectrumMethod::DeterminantRoots => {
            let mut roots = aberth(&problem.characteristic_polynomial());
            for r in roots.iter_mut() {
                for _ in 0..4 {
                    let (f, df) = problem.characteristic(*r);
                    if df.norm() == 0.0 {
                        break;
                    }
                    *r -= f / df;
                }
            }
            roots
        }
    };
    finish(problem, method, energies)
}

/// Both methods, cross-checked.
#[derive(Debug, Clone, Serialize)]
pub struct CheckedSpectrum {
    pub spectrum: Spectrum,
    pub determinant_roots: Vec<Complex64>,
    /// `max |E_eig − E_det| / max(1, |E|)`.
    pub disagreement: f64,
    pub agree: bool,
}

pub fn spectrum(problem: &QesProblem) -> CheckedSpectrum {
    let eig = spectrum_with(problem, SpectrumMethod::Eigen);
    let det = spectrum_with(problem, SpectrumMethod::DeterminantRoots);
    let disagreement = eig
        .energies
        .iter()
        .zip(&det.energies)
        .map(|(a, b)| (a - b).norm() / a.norm().max(1.0))
        .fold(0.0, f64::max);
    CheckedSpectrum {
        agree: disagreement < METHOD_AGREEMENT_TOLERANCE
            && eig.energies.len() == det.energies.len(),
        spectrum: eig,
        determinant_roots: det.energies,
        disagreement,
    }
}

/// `ln φ`'s Gaussian-quartic exponent `−b̃z²/2 − ãz⁴/4`.
fn envelope_exponent(params: &SexticQesParams, z: f64) -> f64 {
    let z2 = z * z;
    -0.5 * params.btilde * z2 - 0.25 * params.atilde * z2 * z2
}

fn prefactor(params: &SexticQesParams, c: &[Complex64], z: f64) -> Complex64 {
    let y = z * z;
    let poly = c
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &cj| acc * y + cj);
    poly * z.powi(i32::from(params.p))
}

/// `φ(z) = zᵖ Pₙ(z²) exp(−b̃z²/2 − ãz⁴/4)` on a grid.
pub fn wavefunction(problem: &QesProblem, c: &[Complex64], grid: &[f64]) -> Vec<Complex64> {
    grid.iter()
        .map(|&z| prefactor(&problem.params, c, z) * envelope_exponent(&problem.params, z).exp())
        .collect()
}

/// Half-width where the envelope has decayed by `e⁻⁴⁰`, or 4 when it does not decay.
pub fn default_extent(params: &SexticQesParams) -> f64 {
    let (a, b) = (params.atilde, params.btilde);
    if a > 0.0 {
        // a y²/4 + b y/2 = 40 with y = z²
        let y = (-b / 2.0 + (b * b / 4.0 + 40.0 * a).sqrt()) / (a / 2.0);
        y.sqrt().max(1.0)
    } else if a == 0.0 && b > 0.0 {
        (80.0 / b).sqrt()
    } else {
        4.0
    }
}

const FD8: [f64; 9] = [
    -1.0 / 560.0,
    8.0 / 315.0,
    -1.0 / 5.0,
    8.0 / 5.0,
    -205.0 / 72.0,
    8.0 / 5.0,
    -1.0 / 5.0,
    8.0 / 315.0,
    -1.0 / 560.0,
];

/// `max |−φ'' + V'φ + Eφ| / max |φ|` on `[−L, L]` with eighth-order central
/// differences at spacing `h`.
pub fn schrodinger_residual(
    problem: &QesProblem,
    e: Complex64,
    c: &[Complex64],
    half_width: f64,
    h: f64,
) -> f64 {
    let steps = (half_width / h).ceil() as i64;
    let grid: Vec<f64> = (-steps - 4..=steps + 4).map(|k| k as f64 * h).collect();
    let phi = wavefunction(problem, c, &grid);
    let v = problem.params.reduced_potential();
    let peak = phi.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for i in 4..grid.len() - 4 {
        let d2: Complex64 = FD8
            .iter()
            .enumerate()
            .map(|(k, w)| *w * phi[i + k - 4])
            .sum::<Complex64>()
            / (h * h);
        let r = -d2 + v.eval(grid[i]) * phi[i] + e * phi[i];
        worst = worst.max(r.norm());
    }
    worst / peak.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum NormVerdict {
    Finite { norm: f64, cutoff: f64 },
    Divergent { reason: String },
}

impl NormVerdict {
    pub fn is_finite(&self) -> bool {
        matches!(self, NormVerdict::Finite { .. })
    }
}

/// Real-axis `∫|φ|²`, with cutoffs doubled from 5 up to [`NORM_CUTOFF`].
pub fn norm_check(problem: &QesProblem, c: &[Complex64]) -> NormVerdict {
    let params = problem.params;
    let log_density =
        |z: f64| 2.0 * (prefactor(&params, c, z).norm().ln() + envelope_exponent(&params, z));
    let mut previous: Option<f64> = None;
    let mut cutoff: f64 = 5.0;
    loop {
        let cut = cutoff.min(NORM_CUTOFF);
        let peak = (0..=4000)
            .map(|k| log_density(cut * k as f64 / 4000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        if peak > 700.0 {
            return NormVerdict::Divergent {
                reason: format!("|φ|² exceeds e^700 within |z| ≤ {cut}"),
            };
        }
        let q = adaptive(|z| log_density(z).exp(), 0.0, cut, 1e-300, 1e-12, 4000);
        let value = 2.0 * q.value;
        if q.converged && value.is_finite() {
            if let Some(prev) = previous {
                if (value - prev).abs() <= 1e-10 * value.abs() {
                    return NormVerdict::Finite {
                        norm: value,
                        cutoff: cut,
                    };
                }
            }
            previous = Some(value);
        } else {
            previous = None;
        }
        if cut >= NORM_CUTOFF {
            return NormVerdict::Divergent {
                reason: format!("∫|φ|² still growing at |z| = {NORM_CUTOFF}"),
            };
        }
        cutoff *= 2.0;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Level {
    pub energy: Complex64,
    pub coefficients: Vec<Complex64>,
    pub norm: NormVerdict,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QesReport {
    pub params: SexticQesParams,
    pub k1: f64,
    pub levels: Vec<Level>,
    pub all_real: bool,
    pub disagreement: f64,
    pub methods_agree: bool,
    pub near_degenerate: Vec<(usize, usize)>,
    pub max_residual: f64,
    pub stokes_wedges: &'static str,
    pub pass: bool,
}

/// Matrix, spectrum, wavefunction residuals and norms for one parameter set.
pub fn solve(params: &SexticQesParams) -> Result<QesReport> {
    let problem = build_recursion_matrix(params)?;
    let checked = spectrum(&problem);
    let half_width = default_extent(params);
    let levels: Vec<Level> = checked
        .spectrum
        .energies
        .iter()
        .zip(&checked.spectrum.coefficients)
        .map(|(&e, c)| Level {
            energy: e,
            coefficients: c.clone(),
            norm: norm_check(&problem, c),
            residual: schrodinger_residual(&problem, e, c, half_width, RESIDUAL_STEP),
        })
        .collect();
    let max_residual = levels.iter().map(|l| l.residual).fold(0.0, f64::max);
    let all_real = checked.spectrum.all_real();
    let pass =
        checked.agree && max_residual < RESIDUAL_TOLERANCE && (params.atilde <= 0.0 || all_real);
    Ok(QesReport {
        params: *params,
        k1: problem.k1,
        levels,
        all_real,
        disagreement: checked.disagreement,
        methods_agree: checked.agree,
        near_degenerate: checked.spectrum.near_degenerate,
        max_residual,
        stokes_wedges: STOKES_WEDGE_NOTE,
        pass,
    })
}

/// Complex radial potential `V(r) − (γ²/4)g²r² + i l γ g(r)` of the
/// rotational problem after the imaginary scaling; no eigensolver.
#[derive(Debug, Clone, Serialize)]
pub struct ComplexRadialPotential {
    pub gain: RadialGain,
    /// `V` as a polynomial in `r`.
    pub potential: Polynomial,
    pub gamma: f64,
    pub l: f64,
    /// Set for constant gain, where a fully real spectrum is not expected.
    pub flag: Option<&'static str>,
}

pub fn assemble_radial_potential(
    gain: RadialGain,
    potential: Polynomial,
    gamma: f64,
    l: f64,
) -> ComplexRadialPotential {
    let flag = match gain {
        RadialGain::Constant(_) => Some("constant-g: no real spectrum expected"),
        RadialGain::Linear(_) => None,
    };
    ComplexRadialPotential {
        gain,
        potential,
        gamma,
        l,
        flag,
    }
}

impl ComplexRadialPotential {
    pub fn eval(&self, r: f64) -> Result<Complex64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "radial potential needs r > 0, got {r}"
            )));
        }
        let g = self.gain.g(r);
        Ok(Complex64::new(
            self.potential.eval(r) - 0.25 * self.gamma * self.gamma * g * g * r * r,
            self.l * self.gamma * g,
        ))
    }

    pub fn centrifugal(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "centrifugal term needs r > 0, got {r}"
            )));
        }
        Ok(self.l * self.l / (r * r))
    }

    /// Real part as a polynomial in `r`.
    pub fn real_part(&self) -> Polynomial {
        let gr = match self.gain {
            RadialGain::Constant(c) => Polynomial::monomial(1, c),
            RadialGain::Linear(c) => Polynomial::monomial(2, c),
        };
        self.potential
            .add(&gr.mul(&gr).scale(-0.25 * self.gamma * self.gamma))
    }
}
