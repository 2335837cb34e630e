//! C ABI for the `pathstat` diagnostics.
//!
//! Paths and reports cross the boundary as opaque handles that the caller
//! releases with the matching `*_free` function. Every fallible function
//! returns a [`PsStatus`]; on failure a message is kept per thread and can
//! be read with [`ps_last_error`] until the next failing call. Panics are
//! caught and reported as `PS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pathstat::generators::{generate, GeneratorSpec};
use pathstat::pathcore::{
    counting_prefix, occurrence_set, pattern_density, read_path_file, Interval, IntervalPattern,
    Path, TailConfig,
};
use pathstat::report::{analyze, AnalysisConfig, AnalysisReport};
use pathstat::stattests::{apply_moving_window, make_builtin_test, TestKind};
use pathstat::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    InvalidArgument = 1,
    ParseError = 2,
    CalibrationFailed = 3,
    ConstructionFailed = 4,
    IoError = 5,
    NullPointer = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Tail-window density estimate of one pattern.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PsDensity {
    pub value: f64,
    pub oscillation: f64,
    pub converged: c_int,
    pub count: usize,
    pub horizon: usize,
}

/// Opaque path handle.
pub struct PsPath {
    inner: Path,
}

/// Opaque analysis report handle.
pub struct PsReport {
    inner: AnalysisReport,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PsStatus {
    match e {
        Error::InvalidArgument(_) => PsStatus::InvalidArgument,
        Error::Parse { .. } | Error::Json(_) => PsStatus::ParseError,
        Error::CalibrationFailed(_) => PsStatus::CalibrationFailed,
        Error::ConstructionFailed { .. } => PsStatus::ConstructionFailed,
        Error::Io(_) => PsStatus::IoError,
    }
}

struct Fail(PsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(PsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn path_arg<'a>(p: *const PsPath) -> Result<&'a Path, Fail> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null("path"))
}

unsafe fn pattern_arg(lo: *const f64, hi: *const f64, k: usize) -> Result<IntervalPattern, Fail> {
    if lo.is_null() || hi.is_null() {
        return Err(null("pattern bounds"));
    }
    if k == 0 {
        return Err(Fail(PsStatus::InvalidArgument, "pattern order is 0".into()));
    }
    let lo = std::slice::from_raw_parts(lo, k);
    let hi = std::slice::from_raw_parts(hi, k);
    let intervals = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| Interval::new(a, b))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IntervalPattern::new(intervals)?)
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the most recent failure on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies `len` finite values into a new path.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_path_from_values(
    values: *const f64,
    len: usize,
    out: *mut *mut PsPath,
) -> PsStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        store(
            out,
            PsPath {
                inner: Path::new(v)?,
            },
        )
    })
}

/// Generates a path from a spec such as `ar1(0.5,1,7),L=100000`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_path_generate(spec: *const c_char, out: *mut *mut PsPath) -> PsStatus {
    guard(|| {
        let spec: GeneratorSpec = str_arg(spec, "spec")?.parse()?;
        store(
            out,
            PsPath {
                inner: generate(&spec)?,
            },
        )
    })
}

/// Reads a one-value-per-line path file.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_path_read(file: *const c_char, out: *mut *mut PsPath) -> PsStatus {
    guard(|| {
        let file = str_arg(file, "file")?;
        store(
            out,
            PsPath {
                inner: read_path_file(std::path::Path::new(file))?,
            },
        )
    })
}

/// Number of values; 0 for a null handle.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_path_len(path: *const PsPath) -> usize {
    path.as_ref().map_or(0, |p| p.inner.len())
}

/// Copies the values into `buf`, which must hold `ps_path_len` doubles.
///
/// # Safety
/// `path` must be a live handle and `buf` writable for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_path_values(
    path: *const PsPath,
    buf: *mut f64,
    capacity: usize,
) -> PsStatus {
    guard(|| {
        let p = path_arg(path)?;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        if capacity < p.len() {
            return Err(Fail(
                PsStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, path has {}", p.len()),
            ));
        }
        ptr::copy_nonoverlapping(p.values().as_ptr(), buf, p.len());
        Ok(())
    })
}

/// # Safety
/// `path` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_path_free(path: *mut PsPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of occurrences of the pattern `(lo[j], hi[j])_{j<k}` starting
/// below `n`.
///
/// # Safety
/// `lo` and `hi` must hold `k` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_occurrence_count(
    path: *const PsPath,
    lo: *const f64,
    hi: *const f64,
    k: usize,
    n: usize,
    out: *mut usize,
) -> PsStatus {
    guard(|| {
        let p = path_arg(path)?;
        let pattern = pattern_arg(lo, hi, k)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let occ = occurrence_set(p, &pattern)?;
        *out = counting_prefix(&occ, n);
        Ok(())
    })
}

/// Tail-window density estimate of a pattern.
///
/// # Safety
/// `lo` and `hi` must hold `k` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_pattern_density(
    path: *const PsPath,
    lo: *const f64,
    hi: *const f64,
    k: usize,
    tail_fraction: f64,
    tolerance: f64,
    out: *mut PsDensity,
) -> PsStatus {
    guard(|| {
        let p = path_arg(path)?;
        let pattern = pattern_arg(lo, hi, k)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let tail = TailConfig {
            tail_fraction,
            tolerance,
        };
        let (occ, _, est) = pattern_density(p, &pattern, &tail)?;
        *out = PsDensity {
            value: est.value,
            oscillation: est.oscillation,
            converged: est.converged as c_int,
            count: occ.len(),
            horizon: occ.source_horizon(),
        };
        Ok(())
    })
}

/// Runs the full diagnostic suite. `config_json` may be null for the
/// defaults or hold a JSON analysis configuration.
///
/// # Safety
/// `path` must be a live handle, `config_json` null or NUL-terminated, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_analyze(
    path: *const PsPath,
    config_json: *const c_char,
    out: *mut *mut PsReport,
) -> PsStatus {
    guard(|| {
        let p = path_arg(path)?;
        let cfg: AnalysisConfig = if config_json.is_null() {
            AnalysisConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config")?).map_err(Error::from)?
        };
        let report = analyze(p, "ffi", None, &cfg)?;
        let json = serde_json::to_string(&report).map_err(Error::from)?;
        let json = CString::new(json).expect("JSON has no NUL");
        store(
            out,
            PsReport {
                inner: report,
                json,
            },
        )
    })
}

/// 1 when every diagnostic passed, 0 otherwise (or for a null handle).
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_report_pass(report: *const PsReport) -> c_int {
    report.as_ref().map_or(0, |r| r.inner.pass as c_int)
}

/// Number of Property E violations in the report.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_report_violations(report: *const PsReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.property_e.violations)
}

/// The report as JSON, owned by the handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_report_json(report: *const PsReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_report_free(report: *mut PsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Slides a built-in test (`threshold_exceedance`, `mean_split`,
/// `variance_split`, `kpss_like`) along the path and reports the upper
/// density of rejections. Any of the output pointers may be null.
///
/// # Safety
/// `path` must be a live handle, `kind` NUL-terminated, and non-null
/// outputs writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ps_moving_window(
    path: *const PsPath,
    kind: *const c_char,
    window_size: usize,
    tau: f64,
    alpha: f64,
    start: usize,
    stride: usize,
    upper_density: *mut f64,
    rejections: *mut usize,
    windows: *mut usize,
) -> PsStatus {
    guard(|| {
        let p = path_arg(path)?;
        let kind: TestKind = str_arg(kind, "kind")?.parse()?;
        let test = make_builtin_test(kind, window_size, tau, alpha)?;
        let record = apply_moving_window(p, &test, start, stride)?;
        if let Some(u) = upper_density.as_mut() {
            *u = record.upper_density;
        }
        if let Some(r) = rejections.as_mut() {
            *r = record.rejections();
        }
        if let Some(w) = windows.as_mut() {
            *w = record.indicators.len();
        }
        Ok(())
    })
}
