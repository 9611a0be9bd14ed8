//! Jacobi elliptic functions and Legendre elliptic integrals.
//!
//! The second argument is always the parameter `m = k²`, with `m ∈ [0, 1)`.
//! Jacobi functions use the descending Landen (AGM) transformation, the
//! complete integrals use the AGM, and the incomplete integral of the second
//! kind uses Carlson's symmetric forms `R_F` and `R_D`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::{Error, Result};

const AGM_MAX_ITER: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jacobi {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
    pub am: f64,
}

fn check_param(m: f64) -> Result<()> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Domain(format!(
            "elliptic parameter {m} outside [0, 1)"
        )));
    }
    Ok(())
}

/// `sn`, `cn`, `dn` and the amplitude `am` at `(u | m)`.
pub fn jacobi(u: f64, m: f64) -> Result<Jacobi> {
    check_param(m)?;
    if !u.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {u}")));
    }
    if m == 0.0 {
        return Ok(Jacobi {
            sn: u.sin(),
            cn: u.cos(),
            dn: 1.0,
            am: u,
        });
    }

    let mut a = [0.0f64; AGM_MAX_ITER + 1];
    let mut c = [0.0f64; AGM_MAX_ITER + 1];
    a[0] = 1.0;
    c[0] = m.sqrt();
    let mut b = (1.0 - m).sqrt();
    let mut n = 0;
    while c[n].abs() > f64::EPSILON * a[n] {
        if n == AGM_MAX_ITER {
            return Err(Error::Domain(format!("AGM failed to converge for m = {m}")));
        }
        let an = a[n];
        a[n + 1] = 0.5 * (an + b);
        c[n + 1] = 0.5 * (an - b);
        b = (an * b).sqrt();
        n += 1;
    }

    let mut phi = (1u64 << n) as f64 * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] * phi.sin() / a[j]).asin());
    }
    let (sn, cn) = phi.sin_cos();
    // (1 − m) + m cn² has no cancellation, unlike 1 − m sn²
    let dn = ((1.0 - m) + m * cn * cn).sqrt();
    Ok(Jacobi {
        sn,
        cn,
        dn,
        am: phi,
    })
}

/// Arithmetic-geometric mean of two non-negative numbers.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= f64::EPSILON * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind, `K(m) = π / (2 AGM(1, √(1-m)))`.
pub fn complete_k(m: f64) -> Result<f64> {
    check_param(m)?;
    if m == 0.0 {
        return Ok(FRAC_PI_2);
    }
    Ok(PI / (2.0 * agm(1.0, (1.0 - m).sqrt())))
}

/// Complete elliptic integral of the second kind via the AGM sum.
pub fn complete_e(m: f64) -> Result<f64> {
    check_param(m)?;
    if m == 0.0 {
        return Ok(FRAC_PI_2);
    }
    let mut a = 1.0;
    let mut b = (1.0 - m).sqrt();
    let mut c = m.sqrt();
    let mut sum = 0.5 * c * c;
    let mut pow = 0.5;
    for _ in 0..AGM_MAX_ITER {
        if c.abs() <= f64::EPSILON * a {
            break;
        }
        let next = 0.5 * (a + b);
        c = 0.5 * (a - b);
        b = (a * b).sqrt();
        a = next;
        pow *= 2.0;
        sum += pow * c * c;
    }
    Ok(PI / (2.0 * a) * (1.0 - sum))
}

/// Carlson's symmetric integral `R_F(x, y, z)`; at most one argument may be zero.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> Result<f64> {
    if x < 0.0 || y < 0.0 || z < 0.0 || (x == 0.0) as u8 + (y == 0.0) as u8 + (z == 0.0) as u8 > 1 {
        return Err(Error::Domain(format!("R_F({x}, {y}, {z}) undefined")));
    }
    const ERRTOL: f64 = 0.0008;
    let (mut x, mut y, mut z) = (x, y, z);
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let mean = (x + y + z) / 3.0;
        let dx = (mean - x) / mean;
        let dy = (mean - y) / mean;
        let dz = (mean - z) / mean;
        if dx.abs().max(dy.abs()).max(dz.abs()) < ERRTOL {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return Ok((1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / mean.sqrt());
        }
    }
}

/// Carlson's symmetric integral `R_D(x, y, z)`; `z > 0` and `x + y > 0`.
pub fn carlson_rd(x: f64, y: f64, z: f64) -> Result<f64> {
    if x < 0.0 || y < 0.0 || z <= 0.0 || x + y == 0.0 {
        return Err(Error::Domain(format!("R_D({x}, {y}, {z}) undefined")));
    }
    const ERRTOL: f64 = 0.0005;
    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = 0.0;
    let mut fac = 1.0;
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + lambda));
        fac *= 0.25;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let mean = 0.2 * (x + y + 3.0 * z);
        let dx = (mean - x) / mean;
        let dy = (mean - y) / mean;
        let dz = (mean - z) / mean;
        if dx.abs().max(dy.abs()).max(dz.abs()) < ERRTOL {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - 6.0 * eb;
            let ee = ed + ec + ec;
            let s = 1.0
                + ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 4.5 / 26.0 * dz * ee)
                + dz * (ee / 6.0 + dz * (-9.0 / 22.0 * ec + dz * 3.0 / 26.0 * ea));
            return Ok(3.0 * sum + fac * s / (mean * mean.sqrt()));
        }
    }
}

/// Incomplete elliptic integral of the second kind `E(φ | m)` for any real `φ`.
pub fn incomplete_e(phi: f64, m: f64) -> Result<f64> {
    check_param(m)?;
    if !phi.is_finite() {
        return Err(Error::Domain(format!("non-finite amplitude {phi}")));
    }
    if m == 0.0 {
        return Ok(phi);
    }
    let periods = (phi / PI).round();
    let reduced = phi - periods * PI;
    let (s, c) = reduced.sin_cos();
    let base = if s == 0.0 {
        0.0
    } else {
        let c2 = c * c;
        let d2 = 1.0 - m * s * s;
        s * carlson_rf(c2, d2, 1.0)? - m * s * s * s / 3.0 * carlson_rd(c2, d2, 1.0)?
    };
    Ok(2.0 * periods * complete_e(m)? + base)
}

/// Incomplete elliptic integral of the first kind `F(φ | m)` for any real `φ`.
pub fn incomplete_f(phi: f64, m: f64) -> Result<f64> {
    check_param(m)?;
    if m == 0.0 {
        return Ok(phi);
    }
    let periods = (phi / PI).round();
    let reduced = phi - periods * PI;
    let (s, c) = reduced.sin_cos();
    let base = if s == 0.0 {
        0.0
    } else {
        s * carlson_rf(c * c, 1.0 - m * s * s, 1.0)?
    };
    Ok(2.0 * periods * complete_k(m)? + base)
}

/// Jacobi's epsilon function `E(am(u) | m)`, the antiderivative of `dn²`.
pub fn epsilon(u: f64, m: f64) -> Result<f64> {
    incomplete_e(jacobi(u, m)?.am, m)
}

/// First and second `u`-derivatives of `sn`, `cn`, `dn`.
#[derive(Debug, Clone, Copy)]
pub struct JacobiDerivatives {
    pub values: Jacobi,
    pub d1: [f64; 3],
    pub d2: [f64; 3],
}

/// Analytic derivatives from `sn' = cn dn`, `cn' = -sn dn`, `dn' = -m sn cn`.
pub fn jacobi_derivatives(u: f64, m: f64) -> Result<JacobiDerivatives> {
    let v = jacobi(u, m)?;
    let Jacobi { sn, cn, dn, .. } = v;
    let d1 = [cn * dn, -sn * dn, -m * sn * cn];
    let d2 = [
        -sn * dn * dn - m * sn * cn * cn,
        -cn * dn * dn + m * sn * sn * cn,
        -m * dn * (cn * cn - sn * sn),
    ];
    Ok(JacobiDerivatives { values: v, d1, d2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite Simpson rule, independent of the AGM path.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn origin_values() {
        for m in [0.0, 0.3, 0.9, 0.999] {
            let j = jacobi(0.0, m).unwrap();
            assert_eq!((j.sn, j.cn, j.dn, j.am), (0.0, 1.0, 1.0, 0.0));
        }
    }

    #[test]
    fn circular_limit() {
        let u = PI / 3.0;
        let j = jacobi(u, 0.0).unwrap();
        assert_eq!(j.sn, u.sin());
        assert_eq!(j.cn, u.cos());
        assert_eq!(j.dn, 1.0);
        assert_eq!(j.am, u);
    }

    #[test]
    fn near_hyperbolic_limit() {
        let m = 1.0 - 1e-12;
        let u = 0.7;
        let j = jacobi(u, m).unwrap();
        assert!((j.sn - u.tanh()).abs() < 1e-6);
        assert!((j.cn - 1.0 / u.cosh()).abs() < 1e-6);
        assert!((j.dn - 1.0 / u.cosh()).abs() < 1e-6);
    }

    #[test]
    fn quarter_period() {
        let m = 0.5;
        let k = complete_k(m).unwrap();
        let j = jacobi(k, m).unwrap();
        assert!((j.sn - 1.0).abs() < 1e-14);
        assert!(j.cn.abs() < 1e-14);
        assert!((j.dn - (1.0 - m).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn complete_integrals() {
        assert_eq!(complete_k(0.0).unwrap(), FRAC_PI_2);
        // Simpson oracle on the defining integral, 2000 panels.
        let k_oracle = simpson(
            |t| 1.0 / (1.0 - 0.5 * t.sin().powi(2)).sqrt(),
            0.0,
            FRAC_PI_2,
            2000,
        );
        assert!((k_oracle - 1.854_074_677_301_372).abs() < 1e-13);
        assert!((complete_k(0.5).unwrap() - 1.854_074_677_301_372).abs() < 1e-14);
        let e_oracle = simpson(
            |t| (1.0 - 0.5 * t.sin().powi(2)).sqrt(),
            0.0,
            FRAC_PI_2,
            2000,
        );
        assert!((complete_e(0.5).unwrap() - e_oracle).abs() < 1e-13);
        assert!((incomplete_e(FRAC_PI_2, 0.5).unwrap() - complete_e(0.5).unwrap()).abs() < 1e-15);
        assert!((incomplete_f(FRAC_PI_2, 0.5).unwrap() - complete_k(0.5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn incomplete_e_against_quadrature() {
        assert_eq!(incomplete_e(1.234, 0.0).unwrap(), 1.234);
        for &(phi, m) in &[(0.3, 0.2), (1.234, 0.7), (-2.5, 0.4), (7.0, 0.9)] {
            let oracle = simpson(|t| (1.0 - m * t.sin().powi(2)).sqrt(), 0.0, phi, 4000);
            assert!(
                (incomplete_e(phi, m).unwrap() - oracle).abs() < 1e-12,
                "phi={phi} m={m}"
            );
        }
    }

    #[test]
    fn domain_errors() {
        assert!(jacobi(0.1, 1.0).is_err());
        assert!(jacobi(0.1, -0.1).is_err());
        assert!(complete_k(1.0).is_err());
        assert!(incomplete_e(0.3, 1.5).is_err());
    }

    #[test]
    fn amplitude_is_continuous_and_monotone() {
        let m = 0.8;
        let mut last = jacobi(0.0, m).unwrap().am;
        for i in 1..2000 {
            let am = jacobi(i as f64 * 0.01, m).unwrap().am;
            assert!(am > last);
            last = am;
        }
    }

    proptest! {
        #[test]
        fn pythagorean_identities(u in -50.0f64..50.0, m in 0.0f64..0.999) {
            let j = jacobi(u, m).unwrap();
            prop_assert!((j.sn * j.sn + j.cn * j.cn - 1.0).abs() < 1e-12);
            prop_assert!((j.dn * j.dn + m * j.sn * j.sn - 1.0).abs() < 1e-12);
        }

        #[test]
        fn periodicity(u in -5.0f64..5.0, m in 0.0f64..0.99) {
            let k = complete_k(m).unwrap();
            let a = jacobi(u, m).unwrap();
            let b = jacobi(u + 4.0 * k, m).unwrap();
            prop_assert!((a.sn - b.sn).abs() < 1e-10);
            prop_assert!((a.cn - b.cn).abs() < 1e-10);
        }

        #[test]
        fn derivative_matches_finite_difference(u in -4.0f64..4.0, m in 0.0f64..0.95) {
            let h = 1e-5;
            let fd = (jacobi(u + h, m).unwrap().sn - jacobi(u - h, m).unwrap().sn) / (2.0 * h);
            let j = jacobi(u, m).unwrap();
            let exact = j.cn * j.dn;
            prop_assert!((fd - exact).abs() <= 1e-7 * exact.abs().max(1e-2));
        }
    }
}
