//! C ABI over the dipolar-cft core.
//!
//! Every function returns a [`DcftStatus`] and writes results through out
//! pointers. On a nonzero status the message is available from
//! [`dcft_last_error`] on the same thread. Loewner flows live behind the
//! opaque [`DcftLoewner`] handle, released with [`dcft_loewner_free`].

use dipolar_cft::bcc::{hat_expectation, Insertion};
use dipolar_cft::correlators::{green_strip, FieldBase, FieldSpec};
use dipolar_cft::loewner::{DrivingPath, LoewnerState, PointStatus, Side};
use dipolar_cft::montecarlo::schramm_formula;
use dipolar_cft::virasoro_checks::{kernel_suite, ope_suite};
use dipolar_cft::{Error, C64};
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes. `DCFT_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcftStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutsideDomain = 3,
    Singular = 4,
    Stopped = 5,
    NumericalFailure = 6,
    Panic = 99,
}

/// Complex number, layout compatible with C99 `double _Complex`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcftComplex {
    pub re: f64,
    pub im: f64,
}

impl From<DcftComplex> for C64 {
    fn from(z: DcftComplex) -> C64 {
        C64::new(z.re, z.im)
    }
}

impl From<C64> for DcftComplex {
    fn from(z: C64) -> DcftComplex {
        DcftComplex { re: z.re, im: z.im }
    }
}

/// Field selector for [`dcft_hat_expectation`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcftField {
    Phi = 0,
    Current = 1,
    Virasoro = 2,
    Vertex = 3,
}

/// State of a tracked point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcftPointState {
    Alive = 0,
    SwallowedLeft = 1,
    SwallowedRight = 2,
}

/// Opaque Loewner flow.
pub struct DcftLoewner {
    state: LoewnerState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DcftStatus {
    match e {
        Error::OutsideDomain(_) => DcftStatus::OutsideDomain,
        Error::PoleAtMarkedPoint(_)
        | Error::PoleAtDriving(_)
        | Error::DiagonalSingularity(..)
        | Error::InsertionSingularity(_)
        | Error::BranchCutCrossing(_)
        | Error::NearMarkedPoint(_) => DcftStatus::Singular,
        Error::Stopped => DcftStatus::Stopped,
        Error::BadStep(_)
        | Error::InvalidConfig(_)
        | Error::Unsupported(_)
        | Error::InsufficientJet { .. } => DcftStatus::InvalidArgument,
        _ => DcftStatus::NumericalFailure,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F>(f: F) -> DcftStatus
where
    F: FnOnce() -> Result<(), DcftStatus>,
{
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DcftStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside dipolar-cft");
            DcftStatus::Panic
        }
    }
}

fn check<T>(r: dipolar_cft::Result<T>) -> Result<T, DcftStatus> {
    r.map_err(|e| {
        set_error(&e.to_string());
        status_of(&e)
    })
}

/// # Safety
/// `p` must be null or valid for writes.
unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, DcftStatus> {
    unsafe { p.as_mut() }.ok_or_else(|| {
        set_error("null pointer argument");
        DcftStatus::NullPointer
    })
}

/// Library version as a static NUL terminated string.
#[no_mangle]
pub extern "C" fn dcft_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, empty after success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn dcft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Mixed Dirichlet/Neumann Green's function of the strip.
///
/// # Safety
/// Pointer arguments must be null or valid for the accesses described.
#[no_mangle]
pub unsafe extern "C" fn dcft_green_strip(
    zeta: DcftComplex,
    z: DcftComplex,
    out: *mut f64,
) -> DcftStatus {
    guard(|| {
        let out = unsafe { out_ref(out) }?;
        *out = check(green_strip(zeta.into(), z.into()))?;
        Ok(())
    })
}

/// `(1/π) arg tanh(z/4)`.
///
/// # Safety
/// Pointer arguments must be null or valid for the accesses described.
#[no_mangle]
pub unsafe extern "C" fn dcft_schramm_formula(z: DcftComplex, out: *mut f64) -> DcftStatus {
    guard(|| {
        let out = unsafe { out_ref(out) }?;
        let z: C64 = z.into();
        if !(z.im >= 0.0 && z.im <= std::f64::consts::PI) || !z.re.is_finite() {
            set_error("point outside the closed strip");
            return Err(DcftStatus::OutsideDomain);
        }
        *out = schramm_formula(z);
        Ok(())
    })
}

/// Expectation of `field` at `z` in the strip chart with the
/// boundary-condition-changing insertion at real position `p`. `alpha` is
/// read only for the vertex field.
///
/// # Safety
/// Pointer arguments must be null or valid for the accesses described.
#[no_mangle]
pub unsafe extern "C" fn dcft_hat_expectation(
    field: DcftField,
    alpha: f64,
    p: f64,
    z: DcftComplex,
    out: *mut DcftComplex,
) -> DcftStatus {
    guard(|| {
        let out = unsafe { out_ref(out) }?;
        let base = match field {
            DcftField::Phi => FieldBase::Phi,
            DcftField::Current => FieldBase::J,
            DcftField::Virasoro => FieldBase::T,
            DcftField::Vertex => FieldBase::Vertex(C64::new(alpha, 0.0)),
        };
        let ins = Insertion::at(p);
        check(ins.validate())?;
        *out = check(hat_expectation(FieldSpec::new(base), z.into(), ins))?.into();
        Ok(())
    })
}

/// Runs the kernel and OPE checks; `pass` is set to 1 if all pass.
///
/// # Safety
/// Pointer arguments must be null or valid for the accesses described.
#[no_mangle]
pub unsafe extern "C" fn dcft_kernel_checks(pass: *mut i32) -> DcftStatus {
    guard(|| {
        let pass = unsafe { out_ref(pass) }?;
        let mut reports = check(kernel_suite())?;
        reports.extend(check(ope_suite())?);
        *pass = reports.iter().all(|r| r.pass) as i32;
        Ok(())
    })
}

/// New flow tracking `n` points of the closed strip. On success `*out`
/// owns the handle.
///
/// # Safety
/// `points` must be valid for `n` reads.
#[no_mangle]
pub unsafe extern "C" fn dcft_loewner_new(
    points: *const DcftComplex,
    n: usize,
    out: *mut *mut DcftLoewner,
) -> DcftStatus {
    guard(|| {
        let out = unsafe { out_ref(out) }?;
        if points.is_null() && n > 0 {
            set_error("null points");
            return Err(DcftStatus::NullPointer);
        }
        let pts: Vec<C64> = if n == 0 {
            vec![]
        } else {
            // SAFETY: non-null and valid for n reads per the contract
            unsafe { std::slice::from_raw_parts(points, n) }
                .iter()
                .map(|&z| z.into())
                .collect()
        };
        let state = check(LoewnerState::new(&pts))?;
        *out = Box::into_raw(Box::new(DcftLoewner { state }));
        Ok(())
    })
}

/// One step of length `dt` after moving the driving by `dxi`.
///
/// # Safety
/// Pointer arguments must be null or valid for the accesses described.
#[no_mangle]
pub unsafe extern "C" fn dcft_loewner_step(h: *mut DcftLoewner, dxi: f64, dt: f64) -> DcftStatus {
    guard(|| {
        let h = unsafe { out_ref(h) }?;
        check(h.state.step(dxi, dt))
    })
}

/// Advances by `n_steps` Brownian steps of `sqrt(kappa) B`, drawn from
/// stream `path` of `seed`.
///
/// # Safety
/// Pointer arguments must be null or valid for the accesses described.
#[no_mangle]
pub unsafe extern "C" fn dcft_loewner_run_brownian(
    h: *mut DcftLoewner,
    kappa: f64,
    dt: f64,
    n_steps: usize,
    seed: u64,
    path: u64,
) -> DcftStatus {
    guard(|| {
        let h = unsafe { out_ref(h) }?;
        let drv = check(DrivingPath::brownian(kappa, dt, n_steps, seed, path))?;
        check(h.state.run(&drv))
    })
}

/// Current Loewner time.
///
/// # Safety
/// Pointer arguments must be null or valid for the accesses described.
#[no_mangle]
pub unsafe extern "C" fn dcft_loewner_time(h: *const DcftLoewner, out: *mut f64) -> DcftStatus {
    guard(|| {
        let out = unsafe { out_ref(out) }?;
        let h = unsafe { out_ref(h.cast_mut()) }?;
        *out = h.state.t;
        Ok(())
    })
}

/// Number of tracked points.
///
/// # Safety
/// Pointer arguments must be null or valid for the accesses described.
#[no_mangle]
pub unsafe extern "C" fn dcft_loewner_len(h: *const DcftLoewner, out: *mut usize) -> DcftStatus {
    guard(|| {
        let out = unsafe { out_ref(out) }?;
        let h = unsafe { out_ref(h.cast_mut()) }?;
        *out = h.state.points.len();
        Ok(())
    })
}

/// Image `w_t(z_i)`, its derivative and state of point `i`. Any out
/// pointer may be null to skip it.
///
/// # Safety
/// Pointer arguments must be null or valid for the accesses described.
#[no_mangle]
pub unsafe extern "C" fn dcft_loewner_point(
    h: *const DcftLoewner,
    i: usize,
    w: *mut DcftComplex,
    dw: *mut DcftComplex,
    state: *mut DcftPointState,
) -> DcftStatus {
    guard(|| {
        let h = unsafe { out_ref(h.cast_mut()) }?;
        let Some(p) = h.state.points.get(i) else {
            set_error(&format!("no tracked point {i}"));
            return Err(DcftStatus::InvalidArgument);
        };
        // SAFETY: each pointer is null or valid for writes
        unsafe {
            if let Some(w) = w.as_mut() {
                *w = p.w.into();
            }
            if let Some(dw) = dw.as_mut() {
                *dw = p.jet[0].into();
            }
            if let Some(s) = state.as_mut() {
                *s = match p.status {
                    PointStatus::Alive => DcftPointState::Alive,
                    PointStatus::Swallowed {
                        side: Side::Left, ..
                    } => DcftPointState::SwallowedLeft,
                    PointStatus::Swallowed {
                        side: Side::Right, ..
                    } => DcftPointState::SwallowedRight,
                };
            }
        }
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `h` must come from [`dcft_loewner_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dcft_loewner_free(h: *mut DcftLoewner) {
    if !h.is_null() {
        // SAFETY: ownership returns from the caller
        drop(unsafe { Box::from_raw(h) });
    }
}
