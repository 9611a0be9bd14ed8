//! C ABI over `gainloss`.
//!
//! Every function returns a [`GlStatus`]; on failure the message is kept per
//! thread and read back with [`gl_last_error`]. Systems and trajectories are
//! opaque heap handles released with their `_free` functions. Panics never
//! cross the boundary: they are caught and reported as [`GlStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gainloss::config::ModelConfig;
use gainloss::dynamics::{self, Coords, PhaseState, Trajectory};
use gainloss::error::FailureKind;
use gainloss::models::SexticQesParams;
use gainloss::ode::IntegratorConfig;
use gainloss::rep::SystemSpec;
use gainloss::{elliptic, invariants, qes, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Integration = 4,
    BlowUp = 5,
    Panic = 6,
    BufferTooSmall = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlCoords {
    X = 0,
    Z = 1,
    Polar = 2,
}

impl From<GlCoords> for Coords {
    fn from(c: GlCoords) -> Self {
        match c {
            GlCoords::X => Coords::X,
            GlCoords::Z => Coords::Z,
            GlCoords::Polar => Coords::Polar,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GlJacobi {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
    pub am: f64,
}

/// Opaque model handle.
pub struct GlSystem {
    spec: SystemSpec,
}

/// Opaque trajectory handle.
pub struct GlTrajectory {
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> GlStatus {
    match err {
        Error::Integration(f) if f.kind == FailureKind::BlowUp => GlStatus::BlowUp,
        Error::Integration(_) => GlStatus::Integration,
        Error::Domain(_)
        | Error::CoordinateSingularity(_)
        | Error::SingularPotential(_)
        | Error::Range { .. } => GlStatus::Domain,
        _ => GlStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> GlStatus {
    let s = status_of(&err);
    set_error(err.to_string());
    s
}

fn guard<F: FnOnce() -> GlStatus>(f: F) -> GlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            GlStatus::Panic
        }
    }
}

fn null(what: &str) -> GlStatus {
    set_error(format!("{what} is null"));
    GlStatus::NullPointer
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Option<&'a [f64]> {
    if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn state_from(
    coords: GlCoords,
    t: f64,
    q: *const f64,
    v: *const f64,
    n: usize,
) -> Result<PhaseState, GlStatus> {
    let (Some(q), Some(v)) = (slice(q, n), slice(v, n)) else {
        return Err(null("q or v"));
    };
    Ok(PhaseState::new(t, q.to_vec(), v.to_vec(), coords.into()))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a catalog model from a TOML model table, e.g.
/// `name = "quartic_translational"` plus an optional `[params]` table.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_system_from_toml(
    toml: *const c_char,
    out: *mut *mut GlSystem,
) -> GlStatus {
    guard(|| {
        if toml.is_null() || out.is_null() {
            return null("toml or out");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(toml).to_str() else {
            set_error("model description is not UTF-8");
            return GlStatus::InvalidArgument;
        };
        let model: ModelConfig = match ::toml::from_str(text) {
            Ok(m) => m,
            Err(e) => return fail(Error::Config(e.to_string())),
        };
        match model.build() {
            Ok(b) => {
                *out = Box::into_raw(Box::new(GlSystem { spec: b.spec }));
                GlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `sys` must be null or a handle from [`gl_system_from_toml`], freed once.
#[no_mangle]
pub unsafe extern "C" fn gl_system_free(sys: *mut GlSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Number of coordinates `2m`.
///
/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_system_dim(sys: *const GlSystem, out: *mut usize) -> GlStatus {
    guard(|| {
        if sys.is_null() || out.is_null() {
            return null("sys or out");
        }
        *out = (*sys).spec.dim();
        GlStatus::Ok
    })
}

/// Energy `H` of a state with `n` coordinates and velocities.
///
/// # Safety
/// `q` and `v` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_system_energy(
    sys: *const GlSystem,
    coords: GlCoords,
    q: *const f64,
    v: *const f64,
    n: usize,
    out: *mut f64,
) -> GlStatus {
    guard(|| {
        if sys.is_null() || out.is_null() {
            return null("sys or out");
        }
        let s = match state_from(coords, 0.0, q, v, n) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match invariants::energy(&(*sys).spec, &s) {
            Ok(h) => {
                *out = h;
                GlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Accelerations in the chart of the state, written to `accel` (`n` doubles).
///
/// # Safety
/// `q`, `v` and `accel` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn gl_system_eom(
    sys: *const GlSystem,
    coords: GlCoords,
    t: f64,
    q: *const f64,
    v: *const f64,
    n: usize,
    accel: *mut f64,
) -> GlStatus {
    guard(|| {
        if sys.is_null() || accel.is_null() {
            return null("sys or accel");
        }
        let s = match state_from(coords, t, q, v, n) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match dynamics::acceleration(&(*sys).spec, &s) {
            Ok(a) => {
                std::slice::from_raw_parts_mut(accel, n).copy_from_slice(&a);
                GlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Integrates from `(t0, q, v)` to `t_end` with the adaptive default method,
/// sampling every `output_dt`. Non-positive `rtol`, `atol` or `output_dt`
/// select the defaults. On blow-up the status is [`GlStatus::BlowUp`] and
/// `*out` still receives the samples recorded before the failure.
///
/// # Safety
/// `q` and `v` must point to `n` doubles; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gl_integrate(
    sys: *const GlSystem,
    coords: GlCoords,
    t0: f64,
    q: *const f64,
    v: *const f64,
    n: usize,
    t_end: f64,
    rtol: f64,
    atol: f64,
    output_dt: f64,
    out: *mut *mut GlTrajectory,
) -> GlStatus {
    guard(|| {
        if sys.is_null() || out.is_null() {
            return null("sys or out");
        }
        *out = ptr::null_mut();
        let s = match state_from(coords, t0, q, v, n) {
            Ok(s) => s,
            Err(st) => return st,
        };
        let mut cfg = IntegratorConfig::default();
        if rtol > 0.0 {
            cfg.rtol = rtol;
        }
        if atol > 0.0 {
            cfg.atol = atol;
        }
        if output_dt > 0.0 {
            cfg.output_dt = output_dt;
        }
        if let Err(e) = cfg.validate() {
            return fail(e);
        }
        let spec = &(*sys).spec;
        let (mut traj, status) = match dynamics::integrate(spec, &s, &cfg, t_end) {
            Ok(t) => (t, GlStatus::Ok),
            Err(Error::Integration(f)) => {
                let f = *f;
                let st = if f.kind == FailureKind::BlowUp {
                    GlStatus::BlowUp
                } else {
                    GlStatus::Integration
                };
                set_error(format!("{:?} at t = {}: {}", f.kind, f.t, f.message));
                (f.partial, st)
            }
            Err(e) => return fail(e),
        };
        if let Err(e) = invariants::log_invariants(spec, &mut traj) {
            return fail(e);
        }
        *out = Box::into_raw(Box::new(GlTrajectory { traj }));
        status
    })
}

/// # Safety
/// `traj` must be null or a handle from [`gl_integrate`], freed once.
#[no_mangle]
pub unsafe extern "C" fn gl_trajectory_free(traj: *mut GlTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples and coordinates per sample.
///
/// # Safety
/// `traj` must be live; `len` and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_trajectory_shape(
    traj: *const GlTrajectory,
    len: *mut usize,
    dim: *mut usize,
) -> GlStatus {
    guard(|| {
        if traj.is_null() || len.is_null() || dim.is_null() {
            return null("traj, len or dim");
        }
        let t = &(*traj).traj;
        *len = t.len();
        *dim = t.states.first().map_or(0, |s| s.q.len());
        GlStatus::Ok
    })
}

/// Sample `index`: time, coordinates and velocities (`n` doubles each).
///
/// # Safety
/// `t` must be writable; `q` and `v` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gl_trajectory_sample(
    traj: *const GlTrajectory,
    index: usize,
    t: *mut f64,
    q: *mut f64,
    v: *mut f64,
    n: usize,
) -> GlStatus {
    guard(|| {
        if traj.is_null() || t.is_null() || q.is_null() || v.is_null() {
            return null("traj, t, q or v");
        }
        let tr = &(*traj).traj;
        let Some(s) = tr.states.get(index) else {
            set_error(format!("sample {index} out of range"));
            return GlStatus::InvalidArgument;
        };
        if n < s.q.len() {
            set_error(format!("buffers hold {n} values, need {}", s.q.len()));
            return GlStatus::BufferTooSmall;
        }
        *t = s.t;
        std::slice::from_raw_parts_mut(q, s.q.len()).copy_from_slice(&s.q);
        std::slice::from_raw_parts_mut(v, s.v.len()).copy_from_slice(&s.v);
        GlStatus::Ok
    })
}

/// Invariants (`H` then the symmetry charges) at sample `index`; `count`
/// receives how many there are even when `cap` is too small.
///
/// # Safety
/// `out` must point to `cap` writable doubles; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_trajectory_invariants(
    traj: *const GlTrajectory,
    index: usize,
    out: *mut f64,
    cap: usize,
    count: *mut usize,
) -> GlStatus {
    guard(|| {
        if traj.is_null() || count.is_null() {
            return null("traj or count");
        }
        let tr = &(*traj).traj;
        let Some(log) = &tr.invariants else {
            *count = 0;
            return GlStatus::Ok;
        };
        let Some(row) = log.values.get(index) else {
            set_error(format!("sample {index} out of range"));
            return GlStatus::InvalidArgument;
        };
        *count = row.len();
        if cap < row.len() || out.is_null() {
            set_error(format!("buffer holds {cap} values, need {}", row.len()));
            return GlStatus::BufferTooSmall;
        }
        std::slice::from_raw_parts_mut(out, row.len()).copy_from_slice(row);
        GlStatus::Ok
    })
}

/// Jacobi elliptic functions of `u` with parameter `m = k²`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_jacobi(u: f64, m: f64, out: *mut GlJacobi) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match elliptic::jacobi(u, m) {
            Ok(j) => {
                *out = GlJacobi {
                    sn: j.sn,
                    cn: j.cn,
                    dn: j.dn,
                    am: j.am,
                };
                GlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// The `n + 1` energies of the sextic problem, ascending; real and imaginary
/// parts go to `re` and `im` (`cap` entries each).
///
/// # Safety
/// `re` and `im` must point to `cap` writable doubles; `count` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gl_qes_spectrum(
    atilde: f64,
    btilde: f64,
    n: usize,
    p: u8,
    re: *mut f64,
    im: *mut f64,
    cap: usize,
    count: *mut usize,
) -> GlStatus {
    guard(|| {
        if count.is_null() {
            return null("count");
        }
        let problem = match SexticQesParams::new(atilde, btilde, n, p)
            .and_then(|s| qes::build_recursion_matrix(&s))
        {
            Ok(pr) => pr,
            Err(e) => return fail(e),
        };
        let e = qes::spectrum(&problem).spectrum.energies;
        *count = e.len();
        if cap < e.len() || re.is_null() || im.is_null() {
            set_error(format!("buffers hold {cap} values, need {}", e.len()));
            return GlStatus::BufferTooSmall;
        }
        for (k, x) in e.iter().enumerate() {
            *re.add(k) = x.re;
            *im.add(k) = x.im;
        }
        GlStatus::Ok
    })
}
