//! C ABI over the tradenet library: opaque handles, status codes and a
//! cbindgen-generated header (`include/tradenet.h`).
//!
//! Every constructor hands out a heap-allocated handle that must be released
//! with the matching `*_free` function. Fallible calls return a [`TnStatus`];
//! on failure a thread-local message with details is available through
//! [`tn_last_error_message`].

// Validation uses `!(x > 0.0)` so NaN fails the check like any other bad value.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::ptr;

use tradenet::ensemble::{fr_identity_check, fr_predict, hamiltonian, EnsembleParams};
use tradenet::error::Error;
use tradenet::ingest::{build_snapshot, parse_flows, parse_gdp, Snapshot};
use tradenet::sampler::{metropolis_run, sample_direct, ChainConfig, SampledGraph};

/// Outcome of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    DataError = 4,
    IoError = 5,
    Utf8Error = 6,
    IndexOutOfRange = 7,
    BufferTooSmall = 8,
}

/// One year of the trade network (weights, GDPs, totals).
pub struct TnSnapshot {
    inner: Snapshot,
}

/// Fitted per-country field parameters.
pub struct TnParams {
    inner: EnsembleParams,
}

/// One sampled realization of all directed weights.
pub struct TnGraph {
    inner: SampledGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(cleaned).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> TnStatus {
    match err {
        Error::Header { .. } | Error::Row { .. } | Error::DuplicateKey { .. } | Error::Csv(_) => {
            TnStatus::ParseError
        }
        Error::NoUsableCountries { .. }
        | Error::DegenerateSnapshot { .. }
        | Error::NonpositiveGdp { .. }
        | Error::MissingFile(_)
        | Error::EmptyInput(_) => TnStatus::DataError,
        Error::SelfPair { .. } | Error::DimensionMismatch { .. } => TnStatus::IndexOutOfRange,
        Error::InvalidChainConfig(_) | Error::InvalidArgument(_) | Error::Config(_) => {
            TnStatus::InvalidArgument
        }
        Error::Io(_) => TnStatus::IoError,
    }
}

fn fail(err: &Error) -> TnStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a str, TnStatus> {
    if ptr.is_null() {
        set_last_error("null path");
        return Err(TnStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("path is not valid UTF-8");
        TnStatus::Utf8Error
    })
}

/// Message describing the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn tn_status_name(status: TnStatus) -> *const c_char {
    let name: &'static CStr = match status {
        TnStatus::Ok => c"ok",
        TnStatus::NullPointer => c"null pointer",
        TnStatus::InvalidArgument => c"invalid argument",
        TnStatus::ParseError => c"parse error",
        TnStatus::DataError => c"data error",
        TnStatus::IoError => c"io error",
        TnStatus::Utf8Error => c"utf-8 error",
        TnStatus::IndexOutOfRange => c"index out of range",
        TnStatus::BufferTooSmall => c"buffer too small",
    };
    name.as_ptr()
}

/// Parse the canonical flow and GDP CSVs and build the snapshot for `year`.
///
/// # Safety
/// `flows_path` and `gdp_path` must be NUL-terminated strings; `out` must be
/// a valid pointer. On success `*out` owns a snapshot that must be released
/// with [`tn_snapshot_free`].
#[no_mangle]
pub unsafe extern "C" fn tn_snapshot_load(
    flows_path: *const c_char,
    gdp_path: *const c_char,
    year: i32,
    out: *mut *mut TnSnapshot,
) -> TnStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return TnStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let flows_path = match path_arg(flows_path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let gdp_path = match path_arg(gdp_path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let open = |p: &str| -> Result<File, TnStatus> {
        File::open(p).map_err(|e| {
            set_last_error(&format!("{p}: {e}"));
            TnStatus::IoError
        })
    };
    let flows_file = match open(flows_path) {
        Ok(f) => f,
        Err(status) => return status,
    };
    let gdp_file = match open(gdp_path) {
        Ok(f) => f,
        Err(status) => return status,
    };
    let flows = match parse_flows(flows_file) {
        Ok(f) => f,
        Err(e) => return fail(&e),
    };
    let gdps = match parse_gdp(gdp_file) {
        Ok(g) => g,
        Err(e) => return fail(&e),
    };
    match build_snapshot(year, &flows, &gdps) {
        Ok((snapshot, _report)) => {
            *out = Box::into_raw(Box::new(TnSnapshot { inner: snapshot }));
            TnStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `snapshot` must come from [`tn_snapshot_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tn_snapshot_free(snapshot: *mut TnSnapshot) {
    if !snapshot.is_null() {
        drop(Box::from_raw(snapshot));
    }
}

/// Number of countries, or 0 for a null handle.
///
/// # Safety
/// `snapshot` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tn_snapshot_node_count(snapshot: *const TnSnapshot) -> usize {
    snapshot.as_ref().map_or(0, |s| s.inner.node_count())
}

/// # Safety
/// `snapshot` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tn_snapshot_year(snapshot: *const TnSnapshot) -> i32 {
    snapshot.as_ref().map_or(0, |s| s.inner.year())
}

unsafe fn scalar_out<T>(out: *mut T, value: T) -> TnStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return TnStatus::NullPointer;
    }
    *out = value;
    TnStatus::Ok
}

/// Sum of all GDPs, millions of USD.
///
/// # Safety
/// `snapshot` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_snapshot_gdp_total(
    snapshot: *const TnSnapshot,
    out: *mut f64,
) -> TnStatus {
    match snapshot.as_ref() {
        None => {
            set_last_error("null snapshot");
            TnStatus::NullPointer
        }
        Some(s) => scalar_out(out, s.inner.gdp_total()),
    }
}

/// Sum of all directed weights, millions of USD.
///
/// # Safety
/// `snapshot` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_snapshot_trade_total(
    snapshot: *const TnSnapshot,
    out: *mut f64,
) -> TnStatus {
    match snapshot.as_ref() {
        None => {
            set_last_error("null snapshot");
            TnStatus::NullPointer
        }
        Some(s) => scalar_out(out, s.inner.trade_total()),
    }
}

/// Directed weight w(i→j); absent pairs are zero.
///
/// # Safety
/// `snapshot` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_snapshot_weight(
    snapshot: *const TnSnapshot,
    i: usize,
    j: usize,
    out: *mut f64,
) -> TnStatus {
    let Some(s) = snapshot.as_ref() else {
        set_last_error("null snapshot");
        return TnStatus::NullPointer;
    };
    let n = s.inner.node_count();
    if i >= n || j >= n {
        set_last_error("node index out of range");
        return TnStatus::IndexOutOfRange;
    }
    scalar_out(out, s.inner.weight(i, j))
}

/// Copy the GDP vector into `buf` (length `len` >= node count).
///
/// # Safety
/// `snapshot` must be a live handle; `buf` must point to at least `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tn_snapshot_gdp(
    snapshot: *const TnSnapshot,
    buf: *mut f64,
    len: usize,
) -> TnStatus {
    let Some(s) = snapshot.as_ref() else {
        set_last_error("null snapshot");
        return TnStatus::NullPointer;
    };
    copy_slice(s.inner.gdp(), buf, len)
}

/// Copy country code `i` into `buf` as a NUL-terminated string.
///
/// # Safety
/// `snapshot` must be a live handle; `buf` must point to at least `len`
/// writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tn_snapshot_country(
    snapshot: *const TnSnapshot,
    i: usize,
    buf: *mut c_char,
    len: usize,
) -> TnStatus {
    let Some(s) = snapshot.as_ref() else {
        set_last_error("null snapshot");
        return TnStatus::NullPointer;
    };
    if buf.is_null() {
        set_last_error("null buffer");
        return TnStatus::NullPointer;
    }
    let Some(code) = s.inner.countries().get(i) else {
        set_last_error("node index out of range");
        return TnStatus::IndexOutOfRange;
    };
    let bytes = code.as_bytes();
    if len < bytes.len() + 1 {
        set_last_error("country buffer too small");
        return TnStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
    *buf.add(bytes.len()) = 0;
    TnStatus::Ok
}

/// Fit the per-country field parameters to a snapshot.
///
/// # Safety
/// `snapshot` must be a live handle; `out` a valid pointer. On success `*out`
/// must be released with [`tn_params_free`].
#[no_mangle]
pub unsafe extern "C" fn tn_params_fit(
    snapshot: *const TnSnapshot,
    out: *mut *mut TnParams,
) -> TnStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return TnStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let Some(s) = snapshot.as_ref() else {
        set_last_error("null snapshot");
        return TnStatus::NullPointer;
    };
    match EnsembleParams::fit(&s.inner) {
        Ok(params) => {
            *out = Box::into_raw(Box::new(TnParams { inner: params }));
            TnStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `params` must come from [`tn_params_fit`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tn_params_free(params: *mut TnParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Number of countries, or 0 for a null handle.
///
/// # Safety
/// `params` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tn_params_node_count(params: *const TnParams) -> usize {
    params.as_ref().map_or(0, |p| p.inner.node_count())
}

fn copy_slice(src: &[f64], buf: *mut f64, len: usize) -> TnStatus {
    if buf.is_null() {
        set_last_error("null buffer");
        return TnStatus::NullPointer;
    }
    if len < src.len() {
        set_last_error("buffer too small");
        return TnStatus::BufferTooSmall;
    }
    unsafe {
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    TnStatus::Ok
}

/// Copy the fitted field parameters into `buf` (length `len` >= node count).
///
/// # Safety
/// `params` must be a live handle; `buf` must point to at least `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tn_params_theta(
    params: *const TnParams,
    buf: *mut f64,
    len: usize,
) -> TnStatus {
    let Some(p) = params.as_ref() else {
        set_last_error("null params");
        return TnStatus::NullPointer;
    };
    copy_slice(p.inner.theta(), buf, len)
}

/// Expected weight of the directed link (i, j).
///
/// # Safety
/// `params` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_params_expected_weight(
    params: *const TnParams,
    i: usize,
    j: usize,
    out: *mut f64,
) -> TnStatus {
    let Some(p) = params.as_ref() else {
        set_last_error("null params");
        return TnStatus::NullPointer;
    };
    match p.inner.expected_weight(i, j) {
        Ok(w) => scalar_out(out, w),
        Err(e) => fail(&e),
    }
}

/// Log of the ensemble partition function.
///
/// # Safety
/// `params` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_params_log_partition(
    params: *const TnParams,
    out: *mut f64,
) -> TnStatus {
    let Some(p) = params.as_ref() else {
        set_last_error("null params");
        return TnStatus::NullPointer;
    };
    scalar_out(out, p.inner.log_partition())
}

/// Draw one exact realization of the ensemble.
///
/// # Safety
/// `params` must be a live handle; `out` a valid pointer. On success `*out`
/// must be released with [`tn_graph_free`].
#[no_mangle]
pub unsafe extern "C" fn tn_sample_direct(
    params: *const TnParams,
    seed: u64,
    out: *mut *mut TnGraph,
) -> TnStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return TnStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let Some(p) = params.as_ref() else {
        set_last_error("null params");
        return TnStatus::NullPointer;
    };
    let graph = sample_direct(&p.inner, seed);
    *out = Box::into_raw(Box::new(TnGraph { inner: graph }));
    TnStatus::Ok
}

/// Run a Metropolis chain and return its final retained sample.
///
/// # Safety
/// `params` must be a live handle; `out` a valid pointer. On success `*out`
/// must be released with [`tn_graph_free`].
#[no_mangle]
pub unsafe extern "C" fn tn_sample_metropolis(
    params: *const TnParams,
    sweeps: usize,
    burn_in: usize,
    thin: usize,
    step_scale: f64,
    seed: u64,
    out: *mut *mut TnGraph,
) -> TnStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return TnStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let Some(p) = params.as_ref() else {
        set_last_error("null params");
        return TnStatus::NullPointer;
    };
    let cfg = ChainConfig {
        sweeps,
        burn_in,
        thin,
        step_scale,
        seed,
    };
    match metropolis_run(&p.inner, &cfg) {
        Ok(chain) => match chain.samples.into_iter().next_back() {
            Some(graph) => {
                *out = Box::into_raw(Box::new(TnGraph { inner: graph }));
                TnStatus::Ok
            }
            None => {
                set_last_error("chain retained no samples");
                TnStatus::InvalidArgument
            }
        },
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `graph` must come from a sampling call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_free(graph: *mut TnGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_node_count(graph: *const TnGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.node_count())
}

/// Copy the dense row-major weight matrix (n*n doubles, zero diagonal).
///
/// # Safety
/// `graph` must be a live handle; `buf` must point to at least `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_weights(
    graph: *const TnGraph,
    buf: *mut f64,
    len: usize,
) -> TnStatus {
    let Some(g) = graph.as_ref() else {
        set_last_error("null graph");
        return TnStatus::NullPointer;
    };
    let n = g.inner.node_count();
    if buf.is_null() {
        set_last_error("null buffer");
        return TnStatus::NullPointer;
    }
    if len < n * n {
        set_last_error("buffer too small");
        return TnStatus::BufferTooSmall;
    }
    for i in 0..n {
        for j in 0..n {
            *buf.add(i * n + j) = if i == j { 0.0 } else { g.inner.weight(i, j) };
        }
    }
    TnStatus::Ok
}

/// Network energy of a sampled graph under the fitted parameters.
///
/// # Safety
/// `params` and `graph` must be live handles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_hamiltonian(
    params: *const TnParams,
    graph: *const TnGraph,
    out: *mut f64,
) -> TnStatus {
    let (Some(p), Some(g)) = (params.as_ref(), graph.as_ref()) else {
        set_last_error("null handle");
        return TnStatus::NullPointer;
    };
    match hamiltonian(&p.inner, &g.inner) {
        Ok(h) => scalar_out(out, h),
        Err(e) => fail(&e),
    }
}

/// First-order predicted relative change of a normalized link weight from the
/// endpoints' relative GDP-share changes.
#[no_mangle]
pub extern "C" fn tn_fr_predict(rel_dxi_i: f64, rel_dxi_j: f64) -> f64 {
    fr_predict(rel_dxi_i, rel_dxi_j)
}

/// Both sides of the per-link fluctuation-response identity at field `eta`:
/// the weight-share variance and the susceptibility, equal in closed form.
///
/// # Safety
/// `variance` and `susceptibility` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tn_fr_identity(
    eta: f64,
    variance: *mut f64,
    susceptibility: *mut f64,
) -> TnStatus {
    if variance.is_null() || susceptibility.is_null() {
        set_last_error("null output pointer");
        return TnStatus::NullPointer;
    }
    if !(eta > 0.0) {
        set_last_error("eta must be positive");
        return TnStatus::InvalidArgument;
    }
    let (var, sus) = fr_identity_check(eta);
    *variance = var;
    *susceptibility = sus;
    TnStatus::Ok
}
