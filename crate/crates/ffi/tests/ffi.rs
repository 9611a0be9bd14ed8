use std::ffi::{c_char, CStr, CString};
use std::process::Command;
use std::ptr;

use gainloss_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        gl_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn system(toml: &str) -> *mut GlSystem {
    let text = CString::new(toml).unwrap();
    let mut sys = ptr::null_mut();
    let st = unsafe { gl_system_from_toml(text.as_ptr(), &mut sys) };
    assert_eq!(st, GlStatus::Ok, "{}", last_error());
    sys
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(gl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn harmonic_bateman_pair_conserves_energy() {
    let sys = system("name = \"bateman\"\n[params]\nomega = 1.0\ngamma = 0.0\ns = 1.0");
    let mut dim = 0;
    assert_eq!(unsafe { gl_system_dim(sys, &mut dim) }, GlStatus::Ok);
    assert_eq!(dim, 2);
    let (q, v) = ([1.0, 0.5], [0.0, 0.2]);
    let mut traj = ptr::null_mut();
    let st = unsafe {
        gl_integrate(
            sys,
            GlCoords::X,
            0.0,
            q.as_ptr(),
            v.as_ptr(),
            2,
            10.0,
            1e-11,
            1e-13,
            0.5,
            &mut traj,
        )
    };
    assert_eq!(st, GlStatus::Ok, "{}", last_error());
    let (mut len, mut d) = (0, 0);
    unsafe { gl_trajectory_shape(traj, &mut len, &mut d) };
    assert_eq!((len, d), (21, 2));
    let mut h = [0.0; 4];
    let mut count = 0;
    let st = unsafe { gl_trajectory_invariants(traj, 0, h.as_mut_ptr(), 4, &mut count) };
    assert_eq!(st, GlStatus::Ok);
    let h0 = h[0];
    let (mut t, mut qq, mut vv) = (0.0, [0.0; 2], [0.0; 2]);
    unsafe {
        gl_trajectory_sample(traj, len - 1, &mut t, qq.as_mut_ptr(), vv.as_mut_ptr(), 2);
        gl_trajectory_invariants(traj, len - 1, h.as_mut_ptr(), 4, &mut count);
    }
    assert_eq!(t, 10.0);
    assert!((h[0] - h0).abs() < 1e-9);
    let mut direct = 0.0;
    unsafe { gl_system_energy(sys, GlCoords::X, qq.as_ptr(), vv.as_ptr(), 2, &mut direct) };
    assert!((direct - h[0]).abs() < 1e-14);
    unsafe {
        gl_trajectory_free(traj);
        gl_system_free(sys);
    }
}

#[test]
fn eom_matches_core() {
    let sys = system("name = \"quartic_translational\"\n[params]\nb = 0.4");
    let (q, v) = ([0.3, -0.2], [0.1, 0.7]);
    let mut a = [0.0; 2];
    assert_eq!(
        unsafe {
            gl_system_eom(
                sys,
                GlCoords::Z,
                0.0,
                q.as_ptr(),
                v.as_ptr(),
                2,
                a.as_mut_ptr(),
            )
        },
        GlStatus::Ok
    );
    let spec =
        gainloss::models::quartic_translational(&gainloss::models::QuarticTranslationalParams {
            b: 0.4,
            ..Default::default()
        })
        .unwrap();
    let s = gainloss::dynamics::PhaseState::new(
        0.0,
        q.to_vec(),
        v.to_vec(),
        gainloss::dynamics::Coords::Z,
    );
    assert_eq!(a.to_vec(), gainloss::dynamics::eom_z(&spec, &s).unwrap());
    unsafe { gl_system_free(sys) };
}

#[test]
fn blow_up_keeps_partial_trajectory() {
    // inverted oscillator with a strong quartic push
    let sys = system(
        "name = \"quartic_translational\"\n[params]\nomega0 = 0.0\nbeta0 = -4.0\ngamma = 0.0",
    );
    let (q, v) = ([0.0, 2.0], [0.0, 3.0]);
    let mut traj = ptr::null_mut();
    let st = unsafe {
        gl_integrate(
            sys,
            GlCoords::Z,
            0.0,
            q.as_ptr(),
            v.as_ptr(),
            2,
            50.0,
            0.0,
            0.0,
            0.01,
            &mut traj,
        )
    };
    assert_eq!(st, GlStatus::BlowUp, "{}", last_error());
    assert!(!traj.is_null());
    let (mut len, mut d) = (0, 0);
    unsafe { gl_trajectory_shape(traj, &mut len, &mut d) };
    assert!(len > 1);
    unsafe {
        gl_trajectory_free(traj);
        gl_system_free(sys);
    }
}

#[test]
fn errors_are_reported() {
    let mut sys = ptr::null_mut();
    assert_eq!(
        unsafe { gl_system_from_toml(ptr::null(), &mut sys) },
        GlStatus::NullPointer
    );
    let bad = CString::new("name = \"nope\"").unwrap();
    assert_eq!(
        unsafe { gl_system_from_toml(bad.as_ptr(), &mut sys) },
        GlStatus::InvalidArgument
    );
    assert!(sys.is_null());
    assert!(last_error().contains("nope"));
    let mut j = GlJacobi::default();
    assert_eq!(unsafe { gl_jacobi(0.3, 1.5, &mut j) }, GlStatus::Domain);
    let len = unsafe { gl_last_error(ptr::null_mut(), 0) };
    assert!(len > 0);
}

#[test]
fn jacobi_and_spectrum() {
    let mut j = GlJacobi::default();
    assert_eq!(unsafe { gl_jacobi(0.7, 0.4, &mut j) }, GlStatus::Ok);
    assert!((j.sn * j.sn + j.cn * j.cn - 1.0).abs() < 1e-15);
    let (mut re, mut im, mut count) = ([0.0; 2], [0.0; 2], 0);
    let st = unsafe {
        gl_qes_spectrum(
            1.0,
            0.0,
            1,
            0,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
            2,
            &mut count,
        )
    };
    assert_eq!(st, GlStatus::Ok);
    assert_eq!(count, 2);
    assert!((re[0] + 8f64.sqrt()).abs() < 1e-12 && (re[1] - 8f64.sqrt()).abs() < 1e-12);
    assert_eq!(im, [0.0, 0.0]);
    let st = unsafe {
        gl_qes_spectrum(
            1.0,
            0.0,
            3,
            0,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
            2,
            &mut count,
        )
    };
    assert_eq!(st, GlStatus::BufferTooSmall);
    assert_eq!(count, 4);
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/gainloss.h");
    let Ok(out) = Command::new("cc")
        .args([
            "-fsyntax-only",
            "-Wall",
            "-Werror",
            "-x",
            "c",
            "-std=c11",
            header,
        ])
        .output()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
