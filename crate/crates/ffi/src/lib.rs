//! C interface to the `kaccess` library.
//!
//! Matrices and clustering results live behind opaque handles that the
//! caller frees with the matching `*_free` function. Fallible calls return a
//! [`KaStatus`]; on failure [`ka_last_error_message`] describes what went
//! wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use kaccess::access::{access_from_time, AccessibilityMatrix, TimeCost};
use kaccess::cluster::{k_access, ClusteringResult, KAccessConfig};
use kaccess::error::Error;
use kaccess::quality::quality_index;

/// Opaque accessibility matrix.
pub struct KaMatrix(AccessibilityMatrix);

/// Opaque K-Access result.
pub struct KaClustering(ClusteringResult);

/// Status codes. Values 2 to 5 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaStatus {
    Ok = 0,
    InvalidArgument = 2,
    InvalidInput = 3,
    NonConvergence = 4,
    Io = 5,
    NullPointer = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

fn fail(status: KaStatus, message: impl Into<String>) -> KaStatus {
    set_error(message);
    status
}

fn status_of(err: &Error) -> KaStatus {
    match err {
        Error::InvalidArgument(_) => KaStatus::InvalidArgument,
        Error::NonConvergence { .. } => KaStatus::NonConvergence,
        Error::MissingInput(_) | Error::Io(_) => KaStatus::Io,
        _ => KaStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> KaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KaStatus::Ok,
        Ok(Err(e)) => fail(status_of(&e), e.to_string()),
        Err(_) => fail(KaStatus::Panic, "internal panic"),
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ka_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// `max(exp(-seconds), min_access)`. Pass `INFINITY` for an unreachable
/// pair. Returns NaN for a negative or NaN time.
#[no_mangle]
pub extern "C" fn ka_access_from_time(seconds: f64, min_access: f64) -> f64 {
    match TimeCost::seconds(seconds) {
        Ok(t) => access_from_time(t, min_access),
        Err(_) => f64::NAN,
    }
}

/// Copies `n * n` row-major entries into a new matrix whose floor value is
/// `min_access`.
///
/// # Safety
/// `entries` must point to `n * n` readable doubles and `out` must be a
/// valid place to store a pointer.
#[no_mangle]
pub unsafe extern "C" fn ka_matrix_from_buffer(
    n: usize,
    entries: *const f64,
    min_access: f64,
    out: *mut *mut KaMatrix,
) -> KaStatus {
    if entries.is_null() || out.is_null() {
        return fail(KaStatus::NullPointer, "null pointer argument");
    }
    let Some(len) = n.checked_mul(n) else {
        return fail(KaStatus::InvalidArgument, "matrix size overflows");
    };
    guard(|| {
        let data = std::slice::from_raw_parts(entries, len).to_vec();
        let m = AccessibilityMatrix::new(n, data, min_access)?;
        *out = Box::into_raw(Box::new(KaMatrix(m)));
        Ok(())
    })
}

/// Loads a matrix file (CSV, or JSON when the name ends in `.json`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid place to store
/// a pointer.
#[no_mangle]
pub unsafe extern "C" fn ka_matrix_read(path: *const c_char, out: *mut *mut KaMatrix) -> KaStatus {
    if path.is_null() || out.is_null() {
        return fail(KaStatus::NullPointer, "null pointer argument");
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return fail(KaStatus::InvalidArgument, "path is not valid UTF-8");
    };
    guard(|| {
        let m = kaccess::io::read_matrix(Path::new(path))?;
        *out = Box::into_raw(Box::new(KaMatrix(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn ka_matrix_free(m: *mut KaMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn ka_matrix_size(m: *const KaMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.n())
}

/// Entry `A[from, to]`, or NaN when out of range.
///
/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn ka_matrix_get(m: *const KaMatrix, from: usize, to: usize) -> f64 {
    match m.as_ref() {
        Some(m) if from < m.0.n() && to < m.0.n() => m.0.get(from, to),
        _ => f64::NAN,
    }
}

/// Runs K-Access. `max_iterations == 0` selects the library default.
///
/// # Safety
/// `m` must be a live matrix handle and `out` a valid place to store a
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ka_k_access(
    m: *const KaMatrix,
    k: usize,
    seed: u64,
    max_iterations: usize,
    out: *mut *mut KaClustering,
) -> KaStatus {
    let (Some(m), false) = (m.as_ref(), out.is_null()) else {
        return fail(KaStatus::NullPointer, "null pointer argument");
    };
    guard(|| {
        let mut config = KAccessConfig::new(k, seed);
        if max_iterations > 0 {
            config.max_iterations = max_iterations;
        }
        let result = k_access(&m.0, &config)?;
        *out = Box::into_raw(Box::new(KaClustering(result)));
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn ka_clustering_free(c: *mut KaClustering) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `c` must be NULL or a live clustering handle.
#[no_mangle]
pub unsafe extern "C" fn ka_clustering_k(c: *const KaClustering) -> usize {
    c.as_ref().map_or(0, |c| c.0.k)
}

/// Number of samples the clustering covers.
///
/// # Safety
/// `c` must be NULL or a live clustering handle.
#[no_mangle]
pub unsafe extern "C" fn ka_clustering_size(c: *const KaClustering) -> usize {
    c.as_ref().map_or(0, |c| c.0.assignment.len())
}

/// Final objective `G`, or NaN for NULL.
///
/// # Safety
/// `c` must be NULL or a live clustering handle.
#[no_mangle]
pub unsafe extern "C" fn ka_clustering_objective(c: *const KaClustering) -> f64 {
    c.as_ref().map_or(f64::NAN, |c| c.0.objective())
}

/// # Safety
/// `c` must be NULL or a live clustering handle.
#[no_mangle]
pub unsafe extern "C" fn ka_clustering_iterations(c: *const KaClustering) -> usize {
    c.as_ref().map_or(0, |c| c.0.iterations)
}

unsafe fn copy_out(values: &[usize], out: *mut usize, len: usize) -> KaStatus {
    if out.is_null() {
        return fail(KaStatus::NullPointer, "null output buffer");
    }
    if len < values.len() {
        return fail(
            KaStatus::InvalidArgument,
            format!("buffer holds {len} values, {} needed", values.len()),
        );
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    KaStatus::Ok
}

/// Writes the `k` centroid sample indices into `out`.
///
/// # Safety
/// `c` must be a live clustering handle and `out` must have room for `len`
/// values.
#[no_mangle]
pub unsafe extern "C" fn ka_clustering_centroids(c: *const KaClustering, out: *mut usize, len: usize) -> KaStatus {
    match c.as_ref() {
        Some(c) => copy_out(&c.0.c_index, out, len),
        None => fail(KaStatus::NullPointer, "null clustering"),
    }
}

/// Writes, for every sample, the index of its centroid sample.
///
/// # Safety
/// `c` must be a live clustering handle and `out` must have room for `len`
/// values.
#[no_mangle]
pub unsafe extern "C" fn ka_clustering_assignment(c: *const KaClustering, out: *mut usize, len: usize) -> KaStatus {
    match c.as_ref() {
        Some(c) => copy_out(&c.0.assignment, out, len),
        None => fail(KaStatus::NullPointer, "null clustering"),
    }
}

/// Quality index of a clustering of `m` with singleton penalty `alpha`.
///
/// # Safety
/// `m` and `c` must be live handles and `out` a valid place to store a
/// double.
#[no_mangle]
pub unsafe extern "C" fn ka_quality_index(
    m: *const KaMatrix,
    c: *const KaClustering,
    alpha: f64,
    out: *mut f64,
) -> KaStatus {
    let (Some(m), Some(c), false) = (m.as_ref(), c.as_ref(), out.is_null()) else {
        return fail(KaStatus::NullPointer, "null pointer argument");
    };
    guard(|| {
        *out = quality_index(&m.0, &c.0, alpha)?.index;
        Ok(())
    })
}
