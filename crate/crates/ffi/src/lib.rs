//! C ABI over `robust-enkf`.
//!
//! Objects cross the boundary as opaque handles created by `re_*_new`-style
//! functions and released with the matching `re_*_free`. Every fallible call
//! returns an [`ReStatus`]; on failure the message is kept per thread and can
//! be read with [`re_last_error_message`]. Matrices are dense, column-major
//! `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

use robust_enkf::controller::{self, BAccess, ControlLaw, OptimalControlWeights, RobustConfig};
use robust_enkf::dual_enkf::{self, EnkfConfig, GainApprox, GainMode, RunningCost};
use robust_enkf::pde_sim::{Boundary, GridSpec, LinearSimulator, PdeKind, PdeSimulator, Simulator};
use robust_enkf::riccati::{self, LtiSystem};
use robust_enkf::{bundle, Error};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NumericalFailure = 4,
    Divergence = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RePde {
    Heat = 0,
    Burgers = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReBoundary {
    Periodic = 0,
    Dirichlet = 1,
}

/// Opaque simulator handle.
pub struct ReSimulator {
    inner: Box<dyn Simulator + Send + Sync>,
}

/// Opaque handle to a learned (or exact) value matrix.
pub struct ReGain {
    inner: GainApprox,
}

/// Opaque handle to a robust control law.
pub struct ReLaw {
    inner: ControlLaw,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(ReStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } => ReStatus::DimensionMismatch,
            Error::InvalidBasis { .. } | Error::Config(_) | Error::InputMapHidden => ReStatus::InvalidArgument,
            Error::Divergence { .. } | Error::BlowUp { .. } => ReStatus::Divergence,
            Error::Io { .. } => ReStatus::Io,
            Error::Parse { .. } => ReStatus::Parse,
            _ => ReStatus::NumericalFailure,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ReStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ReStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ReStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            ReStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            ReStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn matrix(ptr: *const f64, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>, Failure> {
    Ok(DMatrix::from_column_slice(rows, cols, slice(ptr, rows * cols, what)?))
}

unsafe fn vector(ptr: *const f64, len: usize, what: &str) -> Result<DVector<f64>, Failure> {
    Ok(DVector::from_column_slice(slice(ptr, len, what)?))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn path(ptr: *const c_char) -> Result<PathBuf, Failure> {
    if ptr.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn weights(
    n: usize,
    m: usize,
    c: *const f64,
    r: *const f64,
    g: *const f64,
) -> Result<OptimalControlWeights, Failure> {
    Ok(OptimalControlWeights::new(
        matrix(c, n, n, "C")?,
        matrix(r, m, m, "R")?,
        matrix(g, n, n, "G")?,
    )?)
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len - 1` bytes). Returns the full message
/// length in bytes, so a caller can size a buffer with `len = 0`.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null when `len` is 0.
#[no_mangle]
pub unsafe extern "C" fn re_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn re_status_str(status: ReStatus) -> *const c_char {
    let s: &'static CStr = match status {
        ReStatus::Ok => c"ok",
        ReStatus::NullPointer => c"null pointer",
        ReStatus::InvalidArgument => c"invalid argument",
        ReStatus::DimensionMismatch => c"dimension mismatch",
        ReStatus::NumericalFailure => c"numerical failure",
        ReStatus::Divergence => c"divergence",
        ReStatus::Io => c"i/o error",
        ReStatus::Parse => c"parse error",
        ReStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Finite-difference heat or Burgers simulator on `p` points of `[0, length)`
/// with `m` piecewise-constant actuators.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn re_simulator_new_pde(
    pde: RePde,
    nu: f64,
    p: usize,
    length: f64,
    m: usize,
    boundary: ReBoundary,
    out: *mut *mut ReSimulator,
) -> ReStatus {
    guard(|| {
        let kind = match pde {
            RePde::Heat => PdeKind::Heat,
            RePde::Burgers => PdeKind::Burgers,
        };
        let boundary = match boundary {
            ReBoundary::Periodic => Boundary::Periodic,
            ReBoundary::Dirichlet => Boundary::Dirichlet,
        };
        let sim = PdeSimulator::new(kind, nu, GridSpec::new(p, length)?, m, boundary)?;
        emit(out, ReSimulator { inner: Box::new(sim) })
    })
}

/// `dx/dt = A x + B u` with `A` n×n and `B` n×m.
///
/// # Safety
/// `a` and `b` must hold `n*n` and `n*m` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn re_simulator_new_linear(
    n: usize,
    m: usize,
    a: *const f64,
    b: *const f64,
    out: *mut *mut ReSimulator,
) -> ReStatus {
    guard(|| {
        let sim = LinearSimulator::new(matrix(a, n, n, "A")?, matrix(b, n, m, "B")?)?;
        emit(out, ReSimulator { inner: Box::new(sim) })
    })
}

/// # Safety
/// `sim` must be a live handle; `n` and `m` valid or null.
#[no_mangle]
pub unsafe extern "C" fn re_simulator_dims(sim: *const ReSimulator, n: *mut usize, m: *mut usize) -> ReStatus {
    guard(|| {
        let sim = handle(sim, "simulator")?;
        if !n.is_null() {
            *n = sim.inner.state_dim();
        }
        if !m.is_null() {
            *m = sim.inner.control_dim();
        }
        Ok(())
    })
}

/// Writes `S(x, u)` into `out` (length n).
///
/// # Safety
/// `x` and `out` must hold n doubles, `u` m doubles.
#[no_mangle]
pub unsafe extern "C" fn re_simulator_eval(
    sim: *const ReSimulator,
    x: *const f64,
    u: *const f64,
    out: *mut f64,
) -> ReStatus {
    guard(|| {
        let sim = handle(sim, "simulator")?;
        let (n, m) = (sim.inner.state_dim(), sim.inner.control_dim());
        let dx = sim.inner.eval(&vector(x, n, "x")?, &vector(u, m, "u")?);
        slice_mut(out, n, "out")?.copy_from_slice(dx.as_slice());
        Ok(())
    })
}

/// # Safety
/// `sim` must come from a `re_simulator_new_*` call and not be used again.
#[no_mangle]
pub unsafe extern "C" fn re_simulator_free(sim: *mut ReSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Exact stabilizing ARE solution for `(A, B)` with cost weights `C` (n×n),
/// `R` (m×m) and `G` (n×n).
///
/// # Safety
/// Matrix pointers must hold the stated number of doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn re_gain_solve_are(
    n: usize,
    m: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    r: *const f64,
    g: *const f64,
    out: *mut *mut ReGain,
) -> ReStatus {
    guard(|| {
        let w = weights(n, m, c, r, g)?;
        let sys = LtiSystem::new(matrix(a, n, n, "A")?, matrix(b, n, m, "B")?, w.c, w.r, w.g)?;
        let p = riccati::solve_are(&sys)?;
        emit(
            out,
            ReGain {
                inner: GainApprox::from_value_matrix(p, GainMode::Linear)?,
            },
        )
    })
}

fn enkf_config(
    n: usize,
    g: &DMatrix<f64>,
    particles: usize,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<EnkfConfig, Failure> {
    let s_t = robust_enkf::linalg::spd_inverse(g, 0.0, "G")?;
    let cfg = EnkfConfig::new(particles, horizon, dt, s_t, seed);
    cfg.validate()?;
    if cfg.state_dim() != n {
        return Err(Failure(
            ReStatus::DimensionMismatch,
            "G does not match the state dimension".into(),
        ));
    }
    Ok(cfg)
}

/// Dual EnKF on a linear model; the terminal covariance is `G⁻¹`.
///
/// # Safety
/// Matrix pointers must hold the stated number of doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn re_gain_train_linear(
    n: usize,
    m: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    r: *const f64,
    g: *const f64,
    particles: usize,
    horizon: f64,
    dt: f64,
    seed: u64,
    out: *mut *mut ReGain,
) -> ReStatus {
    guard(|| {
        let w = weights(n, m, c, r, g)?;
        let cfg = enkf_config(n, &w.g, particles, horizon, dt, seed)?;
        let gain = dual_enkf::run_dual_enkf_linear(&matrix(a, n, n, "A")?, &matrix(b, n, m, "B")?, &w.c, &w.r, &cfg)?;
        emit(out, ReGain { inner: gain })
    })
}

/// Dual EnKF driven only by calls to `sim`.
///
/// # Safety
/// `sim` must be live; `c`, `g` hold n×n and `r` m×m doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn re_gain_train_nonlinear(
    sim: *const ReSimulator,
    c: *const f64,
    r: *const f64,
    g: *const f64,
    particles: usize,
    horizon: f64,
    dt: f64,
    seed: u64,
    out: *mut *mut ReGain,
) -> ReStatus {
    guard(|| {
        let sim = handle(sim, "simulator")?;
        let (n, m) = (sim.inner.state_dim(), sim.inner.control_dim());
        let w = weights(n, m, c, r, g)?;
        let cfg = enkf_config(n, &w.g, particles, horizon, dt, seed)?;
        let cost = RunningCost::quadratic(w.c);
        let gain = dual_enkf::run_dual_enkf_nonlinear(sim.inner.as_ref(), &cost, &w.r, &cfg)?;
        emit(out, ReGain { inner: gain })
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn re_gain_load(path_: *const c_char, out: *mut *mut ReGain) -> ReStatus {
    guard(|| {
        let gain = bundle::load_gain(&path(path_)?)?;
        emit(out, ReGain { inner: gain })
    })
}

/// # Safety
/// `gain` must be live; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn re_gain_save(gain: *const ReGain, path_: *const c_char) -> ReStatus {
    guard(|| {
        let gain = handle(gain, "gain")?;
        Ok(bundle::save_gain(&path(path_)?, &gain.inner)?)
    })
}

/// State dimension of the gain, or 0 for a null handle.
///
/// # Safety
/// `gain` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn re_gain_dim(gain: *const ReGain) -> usize {
    gain.as_ref().map_or(0, |g| g.inner.dim())
}

/// Copies the value matrix `P̄` (n×n, column-major) into `out`.
///
/// # Safety
/// `out` must hold n*n doubles.
#[no_mangle]
pub unsafe extern "C" fn re_gain_value_matrix(gain: *const ReGain, out: *mut f64) -> ReStatus {
    guard(|| {
        let gain = handle(gain, "gain")?;
        let n = gain.inner.dim();
        slice_mut(out, n * n, "out")?.copy_from_slice(gain.inner.p.as_slice());
        Ok(())
    })
}

/// # Safety
/// `gain` must come from a `re_gain_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn re_gain_free(gain: *mut ReGain) {
    if !gain.is_null() {
        drop(Box::from_raw(gain));
    }
}

/// Robust control law `u = ū + u_d` with constant `lambda` and
/// regularization `r_reg`. `use_input_map = 0` estimates `B` from simulator
/// calls instead of reading it from the simulator. The gain is copied.
///
/// # Safety
/// `gain` must be live; `c`, `g` hold n×n and `r` m×m doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn re_law_new(
    gain: *const ReGain,
    m: usize,
    c: *const f64,
    r: *const f64,
    g: *const f64,
    lambda: f64,
    r_reg: f64,
    use_input_map: i32,
    out: *mut *mut ReLaw,
) -> ReStatus {
    guard(|| {
        let gain = handle(gain, "gain")?;
        let w = weights(gain.inner.dim(), m, c, r, g)?;
        let access = if use_input_map != 0 {
            BAccess::Known
        } else {
            BAccess::SimulatorOnly
        };
        let law = ControlLaw::new(gain.inner.clone(), w, RobustConfig::new(lambda, r_reg)?, access)?;
        emit(out, ReLaw { inner: law })
    })
}

/// Writes the control at `(t, x)` into `u` (length m).
///
/// # Safety
/// `law` and `sim` must be live; `x` holds n and `u` m doubles.
#[no_mangle]
pub unsafe extern "C" fn re_law_control(
    law: *const ReLaw,
    sim: *const ReSimulator,
    t: f64,
    x: *const f64,
    u: *mut f64,
) -> ReStatus {
    guard(|| {
        let law = handle(law, "law")?;
        let sim = handle(sim, "simulator")?;
        let (n, m) = (sim.inner.state_dim(), sim.inner.control_dim());
        if n != law.inner.gain.dim() || m != law.inner.m() {
            return Err(Failure(
                ReStatus::DimensionMismatch,
                format!(
                    "law is {}x{}, simulator is {n}x{m}",
                    law.inner.gain.dim(),
                    law.inner.m()
                ),
            ));
        }
        let v = controller::robust_control(&law.inner, t, &vector(x, n, "x")?, sim.inner.as_ref())?;
        slice_mut(u, m, "u")?.copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// # Safety
/// `law` must come from [`re_law_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn re_law_free(law: *mut ReLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}
