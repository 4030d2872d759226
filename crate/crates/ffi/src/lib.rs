//! C interface to `equimix`.
//!
//! Models and kernels are opaque heap handles created by `eqx_*_new` /
//! `eqx_kernel_build` and released with the matching `*_free`. Every fallible
//! call returns an [`EqxStatus`]; on failure a message is kept per thread and
//! can be copied out with [`eqx_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use equimix::kernel::{full_chain, signed_lumped_chain, unsigned_projection, ChainKind, FiniteKernel};
use equimix::model::{ModelKind, ModelSpec};
use equimix::sim::{run_estimate, Observable, RunConfig};
use equimix::spectral::{gap_report, GapStatus};
use equimix::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    TooLarge = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqxChain {
    Naive = 0,
    EquiEnergy = 1,
    SmallWorld = 2,
}

/// State space of a built kernel. Warm-up kernels are always full.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqxSpace {
    /// Signed energy classes.
    Lumped = 0,
    /// Unsigned levels.
    Projected = 1,
    /// Individual configurations.
    Full = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqxObservable {
    One = 0,
    Magnetization = 1,
    AbsMagnetization = 2,
    Quadrupole = 3,
    Positive = 4,
}

/// Opaque model handle.
pub struct EqxModel {
    spec: ModelSpec,
}

/// Opaque kernel handle.
pub struct EqxKernel {
    kernel: FiniteKernel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EqxGap {
    /// `1 - max(lambda_1, |lambda_min|)`.
    pub gap: f64,
    pub one_minus_lambda1: f64,
    pub lambda1: f64,
    pub lambda_min: f64,
    /// 1 when `one_minus_lambda1` came from the odd-sector refinement.
    pub refined: i32,
    /// 1 when `one_minus_lambda1` is below the eigensolver resolution.
    pub below_resolution: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EqxEstimate {
    pub estimate: f64,
    pub avar: f64,
    pub avar_se: f64,
    pub standard_error: f64,
    pub samples: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> EqxStatus {
    match e {
        Error::TooLarge { .. } => EqxStatus::TooLarge,
        Error::NoConvergence { .. } | Error::NotReversible(_) | Error::Reducible(_) | Error::Degenerate(_) => {
            EqxStatus::Numerical
        }
        _ => EqxStatus::InvalidArgument,
    }
}

struct Fail(EqxStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> EqxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            EqxStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            EqxStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(EqxStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn chain_kind(c: EqxChain) -> ChainKind {
    match c {
        EqxChain::Naive => ChainKind::Naive,
        EqxChain::EquiEnergy => ChainKind::EquiEnergy,
        EqxChain::SmallWorld => ChainKind::SmallWorld,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eqx_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version"),
    };
    V.as_ptr()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn eqx_last_error(buf: *mut c_char, len: usize) -> usize {
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

/// Mean-field Ising model on `n` sites (`n` even).
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn eqx_model_ising(n: usize, beta: f64, out: *mut *mut EqxModel) -> EqxStatus {
    guard(|| store(out, EqxModel { spec: ModelSpec::ising(n, beta)? }))
}

/// Mean-field Blume-Emery-Griffiths model on `n` sites (`n` even).
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn eqx_model_beg(n: usize, beta: f64, k: f64, out: *mut *mut EqxModel) -> EqxStatus {
    guard(|| store(out, EqxModel { spec: ModelSpec::beg(n, beta, k)? }))
}

/// Warming-up target on `{-n, ..., n}`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn eqx_model_warmup(n: usize, theta: f64, epsilon: f64, out: *mut *mut EqxModel) -> EqxStatus {
    guard(|| store(out, EqxModel { spec: ModelSpec::warmup(n, theta, epsilon)? }))
}

/// Sets the local and global-flip weights of the equi-energy mixture.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn eqx_model_set_mixture(model: *mut EqxModel, p1: f64, p2: f64) -> EqxStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        if m.spec.kind == ModelKind::Warmup {
            return Err(Fail(EqxStatus::InvalidArgument, "warm-up models have no mixture".into()));
        }
        m.spec = m.spec.clone().with_mixture(p1, p2)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eqx_model_free(model: *mut EqxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds the transition kernel of `chain` for `model` on `space`.
///
/// # Safety
/// `model` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn eqx_kernel_build(
    model: *const EqxModel,
    chain: EqxChain,
    space: EqxSpace,
    out: *mut *mut EqxKernel,
) -> EqxStatus {
    guard(|| {
        let m = &deref(model, "model")?.spec;
        let c = chain_kind(chain);
        let kernel = match (space, m.kind) {
            (EqxSpace::Full, _) | (_, ModelKind::Warmup) => full_chain(m, c)?,
            (EqxSpace::Lumped, _) => signed_lumped_chain(m, c)?,
            (EqxSpace::Projected, _) => unsigned_projection(&signed_lumped_chain(m, c)?)?,
        };
        store(out, EqxKernel { kernel })
    })
}

/// # Safety
/// `kernel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eqx_kernel_free(kernel: *mut EqxKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Number of states of `kernel`, or 0 for a null handle.
///
/// # Safety
/// `kernel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eqx_kernel_size(kernel: *const EqxKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.kernel.len())
}

/// Writes the dense row-major matrix (`size * size` entries) into `buf`.
///
/// # Safety
/// `kernel` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eqx_kernel_dense(kernel: *const EqxKernel, buf: *mut f64, len: usize) -> EqxStatus {
    guard(|| {
        let k = &deref(kernel, "kernel")?.kernel;
        let n = k.len();
        copy_out(&k.to_dense(), n * n, buf, len)
    })
}

/// Writes the stationary distribution (`size` entries) into `buf`.
///
/// # Safety
/// `kernel` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eqx_kernel_stationary(kernel: *const EqxKernel, buf: *mut f64, len: usize) -> EqxStatus {
    guard(|| {
        let k = &deref(kernel, "kernel")?.kernel;
        copy_out(&k.stationary(), k.len(), buf, len)
    })
}

unsafe fn copy_out(v: &[f64], need: usize, buf: *mut f64, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < need {
        return Err(Fail(EqxStatus::BufferTooSmall, format!("buffer holds {len} values, need {need}")));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), buf, need);
    Ok(())
}

/// Spectral gap of `kernel`.
///
/// # Safety
/// `kernel` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eqx_kernel_gap(kernel: *const EqxKernel, out: *mut EqxGap) -> EqxStatus {
    guard(|| {
        let k = &deref(kernel, "kernel")?.kernel;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = gap_report(k)?;
        *out = EqxGap {
            gap: r.gap,
            one_minus_lambda1: r.one_minus_lambda1,
            lambda1: r.lambda1,
            lambda_min: r.lambda_min,
            refined: (r.status == GapStatus::Refined) as i32,
            below_resolution: (r.status == GapStatus::BelowResolution) as i32,
        };
        Ok(())
    })
}

/// Runs one trajectory of `steps` steps (10% burn-in) from a random start.
///
/// # Safety
/// `model` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eqx_simulate(
    model: *const EqxModel,
    chain: EqxChain,
    observable: EqxObservable,
    steps: u64,
    seed: u64,
    stream: u64,
    out: *mut EqxEstimate,
) -> EqxStatus {
    guard(|| {
        let m = &deref(model, "model")?.spec;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let obs = match observable {
            EqxObservable::One => Observable::One,
            EqxObservable::Magnetization => Observable::Magnetization,
            EqxObservable::AbsMagnetization => Observable::AbsMagnetization,
            EqxObservable::Quadrupole => Observable::Quadrupole,
            EqxObservable::Positive => Observable::Positive,
        };
        let mut cfg = RunConfig::new(steps, seed, obs);
        cfg.stream = stream;
        let r = run_estimate(m, chain_kind(chain), &cfg)?;
        *out = EqxEstimate {
            estimate: r.estimate,
            avar: r.avar,
            avar_se: r.avar_se,
            standard_error: r.standard_error,
            samples: r.samples,
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        let e = Error::TooLarge { what: "x", size: 2, limit: 1 };
        assert_eq!(status_of(&e), EqxStatus::TooLarge);
        assert_eq!(status_of(&Error::Config("x".into())), EqxStatus::InvalidArgument);
    }

    #[test]
    fn version_is_cargo_version() {
        let v = unsafe { CStr::from_ptr(eqx_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
