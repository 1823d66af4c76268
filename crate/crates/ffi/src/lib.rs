//! C ABI over `ctlab`.
//!
//! Results come back through opaque handles (`CtlabReport`) or owned strings.
//! Handles are freed with `ctlab_report_free`, strings with `ctlab_string_free`.
//! Every call returns a `CtlabStatus`; on failure `ctlab_last_error` describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use ctlab::cli::CacheRecord;
use ctlab::curve::point_search;
use ctlab::formulas::{compute_s_d_with, SdOptions, SdReport, Verdict};
use ctlab::ideals::RepScan;
use ctlab::modular::PrecisionContext;
use ctlab::verify::{all_ok, run_suite, Suite, SuiteConfig};
use ctlab::Error;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    RecognitionFailure = 3,
    ConsistencyFailure = 4,
    NumericFailure = 5,
    VerificationFailed = 6,
    NotFound = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtlabVerdict {
    NoRationalSolutions = 0,
    ExpectSolutions = 1,
    Unknown = 2,
}

impl From<Verdict> for CtlabVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::NoRationalSolutions => CtlabVerdict::NoRationalSolutions,
            Verdict::ExpectSolutions => CtlabVerdict::ExpectSolutions,
            Verdict::Unknown => CtlabVerdict::Unknown,
        }
    }
}

/// Opaque result of `ctlab_compute`.
pub struct CtlabReport {
    report: SdReport,
    bits: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CtlabStatus {
    match e {
        Error::InvalidInput(_) | Error::NotPrime(_) | Error::NotCoprime(_) | Error::NonCoprimeToThree(_) => {
            CtlabStatus::InvalidInput
        }
        Error::RecognitionFailure { .. } | Error::NonRealResidual(_) => CtlabStatus::RecognitionFailure,
        Error::ConsistencyFailure(_) => CtlabStatus::ConsistencyFailure,
        _ => CtlabStatus::NumericFailure,
    }
}

fn fail(status: CtlabStatus, msg: impl Into<String>) -> CtlabStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, mapping library errors and panics to status codes.
fn guard<F: FnOnce() -> Result<CtlabStatus, Error> + UnwindSafe>(f: F) -> CtlabStatus {
    match catch_unwind(f) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => fail(status_of(&e), e.to_string()),
        Err(_) => fail(CtlabStatus::Panic, "panic inside ctlab"),
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

fn context(prec_bits: u32) -> Result<PrecisionContext, Error> {
    if prec_bits < 64 {
        return Err(Error::InvalidInput(format!("precision {prec_bits} is below 64 bits")));
    }
    Ok(PrecisionContext::new(prec_bits))
}

/// Message for the last failure on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn ctlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ctlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Computes `S_D` (and `T_D` when defined) at `prec_bits`.
/// `seed` selects class representatives; 0 uses the default scan.
/// `point_height` bounds the corroborating point search (0 disables it).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ctlab_compute(
    d: u64,
    prec_bits: u32,
    seed: u64,
    point_height: u64,
    out: *mut *mut CtlabReport,
) -> CtlabStatus {
    if out.is_null() {
        return fail(CtlabStatus::NullPointer, "out is null");
    }
    guard(move || {
        let ctx = context(prec_bits)?;
        let opts = SdOptions {
            point_height,
            scan: if seed == 0 { RepScan::default() } else { RepScan::seeded(seed) },
            ..SdOptions::default()
        };
        let report = compute_s_d_with(d, &opts, &ctx)?;
        let handle = Box::new(CtlabReport { report, bits: prec_bits });
        // SAFETY: checked non-null above; the caller guarantees it is writable.
        unsafe { *out = Box::into_raw(handle) };
        Ok(CtlabStatus::Ok)
    })
}

/// # Safety
/// `report` must come from `ctlab_compute` and not be freed already; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ctlab_report_free(report: *mut CtlabReport) {
    if !report.is_null() {
        // SAFETY: created by Box::into_raw in ctlab_compute.
        drop(unsafe { Box::from_raw(report) });
    }
}

unsafe fn report_ref<'a>(report: *const CtlabReport) -> Option<&'a SdReport> {
    // SAFETY: the caller passes a live handle or null.
    unsafe { report.as_ref() }.map(|r| &r.report)
}

/// `S_D` as `"p/q"`; free with `ctlab_string_free`. Null on a null handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ctlab_report_s_d(report: *const CtlabReport) -> *mut c_char {
    unsafe { report_ref(report) }.map_or(ptr::null_mut(), |r| into_c_string(r.s_d.to_string()))
}

/// `T_D` rendered (`"-3·√-3"`, `"9"`), or null when not defined for this `D`.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ctlab_report_t_d(report: *const CtlabReport) -> *mut c_char {
    unsafe { report_ref(report) }
        .and_then(|r| r.t_d.as_ref())
        .map_or(ptr::null_mut(), |t| into_c_string(t.to_string()))
}

/// Tamagawa product `c_3D`; 0 on a null handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ctlab_report_c3d(report: *const CtlabReport) -> u64 {
    unsafe { report_ref(report) }.map_or(0, |r| r.c3d)
}

/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ctlab_report_verdict(report: *const CtlabReport) -> CtlabVerdict {
    unsafe { report_ref(report) }.map_or(CtlabVerdict::Unknown, |r| r.verdict.into())
}

/// The full record as JSON, in the cache format.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ctlab_report_json(report: *const CtlabReport) -> *mut c_char {
    // SAFETY: the caller passes a live handle or null.
    let Some(r) = (unsafe { report.as_ref() }) else {
        return ptr::null_mut();
    };
    serde_json::to_string(&CacheRecord::from_report(&r.report, r.bits)).map_or(ptr::null_mut(), into_c_string)
}

/// Smallest point on `x³ + y³ = d` with denominator at most `height`, written as `"x,y"`.
/// Returns `NotFound` (and leaves `out` untouched) when there is none.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one string pointer.
#[no_mangle]
pub unsafe extern "C" fn ctlab_point_search(d: u64, height: u64, out: *mut *mut c_char) -> CtlabStatus {
    if out.is_null() {
        return fail(CtlabStatus::NullPointer, "out is null");
    }
    if d == 0 {
        return fail(CtlabStatus::InvalidInput, "d must be at least 1");
    }
    guard(move || match point_search(d, height) {
        Some(p) => {
            // SAFETY: checked non-null above.
            unsafe { *out = into_c_string(format!("{},{}", p.x, p.y)) };
            Ok(CtlabStatus::Ok)
        }
        None => Ok(fail(CtlabStatus::NotFound, format!("no point with denominator ≤ {height}"))),
    })
}

/// Runs a verification suite by name; the report (JSON array) goes to `out`.
/// Returns `VerificationFailed` when any identity fails; `out` is filled either way.
///
/// # Safety
/// `suite` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctlab_verify(suite: *const c_char, prec_bits: u32, out: *mut *mut c_char) -> CtlabStatus {
    if suite.is_null() || out.is_null() {
        return fail(CtlabStatus::NullPointer, "suite or out is null");
    }
    // SAFETY: checked non-null; the caller guarantees NUL termination.
    let name = match unsafe { CStr::from_ptr(suite) }.to_str() {
        Ok(s) => s.to_owned(),
        Err(_) => return fail(CtlabStatus::InvalidInput, "suite name is not UTF-8"),
    };
    guard(move || {
        let suite: Suite = name.parse()?;
        let results = run_suite(suite, &SuiteConfig::default(), &context(prec_bits)?)?;
        let json = serde_json::to_string(&results).map_err(|e| Error::ConsistencyFailure(e.to_string()))?;
        // SAFETY: checked non-null above.
        unsafe { *out = into_c_string(json) };
        Ok(if all_ok(&results) {
            CtlabStatus::Ok
        } else {
            fail(CtlabStatus::VerificationFailed, "some identities failed")
        })
    })
}

/// # Safety
/// `s` must come from this library and not be freed already; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ctlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: created by CString::into_raw here.
        drop(unsafe { CString::from_raw(s) });
    }
}
