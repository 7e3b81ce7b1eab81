//! C ABI for the `kropina` engine.
//!
//! Objects are exposed as opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`KrStatus`]; on failure a human-readable message is available from
//! [`kr_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use kropina::compare::{frechet_distance, sup_distance, FrechetOptions};
use kropina::config::{load_model, parse_model_config, LoadedModel};
use kropina::connect::{connect_points, ShootingProblem};
use kropina::euler_lagrange::{integrate_geodesic, Gauge, TraceOptions};
use kropina::geometry::eval_f;
use kropina::lift::{lift_trace, LiftOptions};
use kropina::ode::Tolerances;
use kropina::trajectory::Trajectory;
use kropina::{io, Error};
use nalgebra::DVector;

/// Result codes. `KR_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Syntax = 3,
    DimensionMismatch = 4,
    Degenerate = 5,
    KernelDirection = 6,
    KernelApproach = 7,
    NotClosed = 8,
    NotFound = 9,
    Numerical = 10,
    Io = 11,
    Panic = 12,
}

impl From<&Error> for KrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Syntax { .. } | Error::UnknownSymbol { .. } => KrStatus::Syntax,
            Error::DimensionMismatch(_) => KrStatus::DimensionMismatch,
            Error::DegenerateMetric
            | Error::NonCompactIndicatrix
            | Error::DegenerateOnKernel { .. }
            | Error::NullOmega
            | Error::SingularPoint
            | Error::OriginExcluded => KrStatus::Degenerate,
            Error::KernelDirection { .. } | Error::NotInKernel { .. } | Error::InExceptionalSet | Error::NotAdmissible { .. } => {
                KrStatus::KernelDirection
            }
            Error::KernelApproach { .. } => KrStatus::KernelApproach,
            Error::NotClosed { .. } => KrStatus::NotClosed,
            Error::NotFound { .. } => KrStatus::NotFound,
            Error::InconsistentSystem { .. } | Error::GaugeSingular { .. } | Error::StepSizeUnderflow { .. } => KrStatus::Numerical,
            Error::OutOfSpan { .. } | Error::InvalidInput(_) => KrStatus::InvalidInput,
            Error::Io(_) => KrStatus::Io,
        }
    }
}

/// Integration gauge selector for [`kr_trace`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrGauge {
    OmegaConstant = 0,
    FArclength = 1,
}

impl From<KrGauge> for Gauge {
    fn from(g: KrGauge) -> Self {
        match g {
            KrGauge::OmegaConstant => Gauge::OmegaConstant,
            KrGauge::FArclength => Gauge::FArclength,
        }
    }
}

/// Opaque Kropina structure.
pub struct KrStructure {
    model: LoadedModel,
}

/// Opaque sampled trajectory.
pub struct KrTrajectory {
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Fail {
    Status(KrStatus, String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(KrStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> KrStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KrStatus::Ok,
        Ok(Err(Fail::Status(code, msg))) => {
            set_last_error(msg);
            code
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            KrStatus::from(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            KrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Status(KrStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

unsafe fn vec_arg(p: *const f64, len: usize, what: &str) -> Result<DVector<f64>, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(DVector::from_column_slice(std::slice::from_raw_parts(p, len)))
}

unsafe fn structure_ref<'a>(s: *const KrStructure) -> Result<&'a KrStructure, Fail> {
    s.as_ref().ok_or_else(|| null("structure"))
}

unsafe fn trajectory_ref<'a>(t: *const KrTrajectory) -> Result<&'a KrTrajectory, Fail> {
    t.as_ref().ok_or_else(|| null("trajectory"))
}

fn check_dim(s: &KrStructure, n: usize) -> Result<(), Fail> {
    let dim = s.model.structure.dim();
    if dim != n {
        return Err(Fail::Core(Error::DimensionMismatch(format!("model has dimension {dim}, got {n}"))));
    }
    Ok(())
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = v;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next `kr_*` call on the same thread.
#[no_mangle]
pub extern "C" fn kr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a catalog model (`heisenberg:1`, `burns-shnider:2`, ...) or a
/// configuration file path.
///
/// # Safety
/// `spec` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kr_structure_load(spec: *const c_char, out: *mut *mut KrStructure) -> KrStatus {
    guard(|| {
        let spec = str_arg(spec, "spec")?;
        let model = load_model(spec)?;
        put(out, Box::into_raw(Box::new(KrStructure { model })), "out")
    })
}

/// Builds a structure from configuration text.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kr_structure_from_config(text: *const c_char, out: *mut *mut KrStructure) -> KrStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let cfg = parse_model_config(text)?;
        let model = LoadedModel { structure: cfg.to_structure()?, cr: cfg.cr_spec()?, config: Some(cfg.to_string()) };
        put(out, Box::into_raw(Box::new(KrStructure { model })), "out")
    })
}

/// # Safety
/// `s` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kr_structure_free(s: *mut KrStructure) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Manifold dimension, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kr_structure_dim(s: *const KrStructure) -> usize {
    s.as_ref().map_or(0, |s| s.model.structure.dim())
}

/// `F(x, v) = g(v,v)/ω(v)`.
///
/// # Safety
/// `x` and `v` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_eval_f(s: *const KrStructure, x: *const f64, v: *const f64, n: usize, out: *mut f64) -> KrStatus {
    guard(|| {
        let s = structure_ref(s)?;
        check_dim(s, n)?;
        let x = vec_arg(x, n, "x")?;
        let v = vec_arg(v, n, "v")?;
        put(out, eval_f(&s.model.structure, &x, &v)?, "out")
    })
}

/// Integrates the geodesic through `(x, xi)` up to `t_max`.
///
/// # Safety
/// `x` and `xi` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_trace(
    s: *const KrStructure,
    x: *const f64,
    xi: *const f64,
    n: usize,
    gauge: KrGauge,
    t_max: f64,
    rtol: f64,
    atol: f64,
    out: *mut *mut KrTrajectory,
) -> KrStatus {
    guard(|| {
        let s = structure_ref(s)?;
        check_dim(s, n)?;
        let x = vec_arg(x, n, "x")?;
        let xi = vec_arg(xi, n, "xi")?;
        let opts = TraceOptions::new(gauge.into(), t_max).with_tol(rtol, atol);
        let traj = integrate_geodesic(&s.model.structure, &x, &xi, &opts)?;
        put(out, Box::into_raw(Box::new(KrTrajectory { traj })), "out")
    })
}

/// Integrates the null geodesic of the lifted metric and returns its
/// projection.
///
/// # Safety
/// `x` and `xi` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_lift_trace(
    s: *const KrStructure,
    x: *const f64,
    xi: *const f64,
    n: usize,
    t_max: f64,
    rtol: f64,
    atol: f64,
    out: *mut *mut KrTrajectory,
) -> KrStatus {
    guard(|| {
        let s = structure_ref(s)?;
        check_dim(s, n)?;
        let x = vec_arg(x, n, "x")?;
        let xi = vec_arg(xi, n, "xi")?;
        let opts = LiftOptions { tol: Tolerances::new(rtol, atol), t_max, ..Default::default() };
        let (_, traj) = lift_trace(&s.model.structure, &x, &xi, &opts)?;
        put(out, Box::into_raw(Box::new(KrTrajectory { traj })), "out")
    })
}

/// Finds a forward geodesic from `p` to `q`; writes its length to `length`.
///
/// # Safety
/// `p` and `q` must point to `n` doubles; `out` and `length` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_connect(
    s: *const KrStructure,
    p: *const f64,
    q: *const f64,
    n: usize,
    out: *mut *mut KrTrajectory,
    length: *mut f64,
) -> KrStatus {
    guard(|| {
        let s = structure_ref(s)?;
        check_dim(s, n)?;
        if out.is_null() || length.is_null() {
            return Err(null("out"));
        }
        let prob = ShootingProblem::new(s.model.structure.clone(), vec_arg(p, n, "p")?, vec_arg(q, n, "q")?)?;
        let conn = connect_points(&prob)?;
        *length = conn.length;
        *out = Box::into_raw(Box::new(KrTrajectory { traj: conn.trajectory }));
        Ok(())
    })
}

/// Reads a trajectory CSV file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kr_trajectory_read_csv(path: *const c_char, out: *mut *mut KrTrajectory) -> KrStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let traj = io::read_trajectory(Path::new(path))?;
        put(out, Box::into_raw(Box::new(KrTrajectory { traj })), "out")
    })
}

/// # Safety
/// `t` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn kr_trajectory_write_csv(t: *const KrTrajectory, path: *const c_char) -> KrStatus {
    guard(|| {
        let t = trajectory_ref(t)?;
        let path = str_arg(path, "path")?;
        io::write_trajectory(&t.traj, Path::new(path))?;
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kr_trajectory_free(t: *mut KrTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kr_trajectory_len(t: *const KrTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.traj.len())
}

/// Dimension of the samples, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kr_trajectory_dim(t: *const KrTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.traj.dim())
}

/// Copies sample `index`. `x` and `xi` receive `dim` doubles each; any
/// output pointer may be null to skip it.
///
/// # Safety
/// Non-null outputs must be valid for the stated number of writes.
#[no_mangle]
pub unsafe extern "C" fn kr_trajectory_sample(
    t: *const KrTrajectory,
    index: usize,
    time: *mut f64,
    x: *mut f64,
    xi: *mut f64,
    f: *mut f64,
    omega_xi: *mut f64,
) -> KrStatus {
    guard(|| {
        let t = trajectory_ref(t)?;
        let smp = t.traj.samples.get(index).ok_or_else(|| {
            Fail::Status(KrStatus::InvalidInput, format!("sample {index} out of range (len {})", t.traj.len()))
        })?;
        if !time.is_null() {
            *time = smp.t;
        }
        if !x.is_null() {
            std::slice::from_raw_parts_mut(x, smp.x.len()).copy_from_slice(smp.x.as_slice());
        }
        if !xi.is_null() {
            std::slice::from_raw_parts_mut(xi, smp.xi.len()).copy_from_slice(smp.xi.as_slice());
        }
        if !f.is_null() {
            *f = smp.f;
        }
        if !omega_xi.is_null() {
            *omega_xi = smp.omega_xi;
        }
        Ok(())
    })
}

/// Parameter-wise sup distance over the common time span.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_sup_distance(a: *const KrTrajectory, b: *const KrTrajectory, out: *mut f64) -> KrStatus {
    guard(|| {
        let d = sup_distance(&trajectory_ref(a)?.traj, &trajectory_ref(b)?.traj)?;
        put(out, d, "out")
    })
}

/// Discrete Fréchet distance after arc-length resampling with `points`
/// intervals; `reverse_second` traverses `b` from its end.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kr_frechet_distance(
    a: *const KrTrajectory,
    b: *const KrTrajectory,
    points: usize,
    reverse_second: bool,
    out: *mut f64,
) -> KrStatus {
    guard(|| {
        let opts = FrechetOptions { points, max_length: None, reverse_second };
        let d = frechet_distance(&trajectory_ref(a)?.traj, &trajectory_ref(b)?.traj, &opts)?;
        put(out, d, "out")
    })
}
