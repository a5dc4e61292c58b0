//! C interface to the streaming PCA, the offline kernel classifier and the
//! online posterior recursion.
//!
//! Every function returns an [`NpStatus`]. On failure a message is kept per
//! thread and can be read with [`np_last_error_message`]. Handles are opaque
//! and must be released with the matching `*_free` function. Matrices are
//! passed row-major as `rows * cols` doubles. Class labels are numbered from
//! one; posterior arrays hold class 1 first.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ndarray::{ArrayView1, ArrayView2};
use npclass::data::Dataset;
use npclass::kernel::{default_grid, loo_cv_select_shared, CvMode, KernelId, OfflineClassifier};
use npclass::online::{default_c_gamma_grid, init_online, tune_c_gamma, OnlinePosteriorState, OnlineSnapshot, StepSchedule};
use npclass::pca::{init_streaming_pca, StreamingPcaState};
use npclass::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Degenerate = 4,
    NonConvergence = 5,
    Data = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpKernel {
    Epanechnikov = 0,
}

impl From<NpKernel> for KernelId {
    fn from(k: NpKernel) -> Self {
        match k {
            NpKernel::Epanechnikov => KernelId::Epanechnikov,
        }
    }
}

/// Incremental PCA over a stream of observations.
pub struct NpStreamingPca(StreamingPcaState);

/// Kernel posterior classifier with per-class adaptive bandwidths.
pub struct NpOfflineClassifier(OfflineClassifier);

/// Posterior estimates at fixed query points, updated one observation at a time.
pub struct NpOnlineState {
    state: OnlinePosteriorState,
    schedule: StepSchedule,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> NpStatus {
    match e {
        Error::DimensionMismatch { .. } => NpStatus::DimensionMismatch,
        Error::InvalidArgument { .. } => NpStatus::InvalidArgument,
        Error::Degenerate(_) => NpStatus::Degenerate,
        Error::NonConvergence { .. } => NpStatus::NonConvergence,
        _ => NpStatus::Data,
    }
}

struct Fail(NpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(NpStatus::NullPointer, format!("`{name}` is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(NpStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            NpStatus::Panic
        }
    }
}

unsafe fn vector<'a>(p: *const f64, len: usize, name: &str) -> Result<ArrayView1<'a, f64>, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(ArrayView1::from(slice::from_raw_parts(p, len)))
}

unsafe fn matrix<'a>(p: *const f64, rows: usize, cols: usize, name: &str) -> Result<ArrayView2<'a, f64>, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    let len = rows.checked_mul(cols).ok_or_else(|| invalid(format!("`{name}` is too large")))?;
    ArrayView2::from_shape((rows, cols), slice::from_raw_parts(p, len)).map_err(|e| invalid(e.to_string()))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn handle_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn dataset(x: *const f64, labels: *const u32, n: usize, d: usize, n_classes: usize) -> Result<Dataset, Fail> {
    let feats = matrix(x, n, d, "x")?.to_owned();
    if labels.is_null() {
        return Err(null("labels"));
    }
    let labels = slice::from_raw_parts(labels, n)
        .iter()
        .map(|&y| class_index(y, n_classes))
        .collect::<Result<_, _>>()?;
    Ok(Dataset::new(
        feats,
        labels,
        (0..d).map(|j| format!("x{}", j + 1)).collect(),
        (0..n_classes).map(|g| format!("class{g}")).collect(),
    )?)
}

fn class_index(label: u32, n_classes: usize) -> Result<usize, Fail> {
    if label == 0 || label as usize > n_classes {
        return Err(invalid(format!("label {label} outside 1..={n_classes}")));
    }
    Ok(label as usize - 1)
}

fn check_len(expected: usize, got: usize) -> Result<(), Fail> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got }.into())
    }
}

/// Message of the last failed call on this thread, or null after a
/// successful one. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn np_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn np_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Starts an incremental PCA from batch PCA on the first `n0` rows.
#[no_mangle]
pub unsafe extern "C" fn np_pca_new(
    head: *const f64,
    n0: usize,
    d: usize,
    q: usize,
    out: *mut *mut NpStreamingPca,
) -> NpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let state = init_streaming_pca(matrix(head, n0, d, "head")?, q)?;
        *out = Box::into_raw(Box::new(NpStreamingPca(state)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn np_pca_update(pca: *mut NpStreamingPca, x: *const f64, d: usize) -> NpStatus {
    guard(|| {
        let pca = handle_mut(pca, "pca")?;
        check_len(pca.0.input_dim(), d)?;
        Ok(pca.0.update(vector(x, d, "x")?)?)
    })
}

/// Writes the `q` component scores of `x` under the current basis.
#[no_mangle]
pub unsafe extern "C" fn np_pca_project(
    pca: *const NpStreamingPca,
    x: *const f64,
    d: usize,
    out: *mut f64,
    q: usize,
) -> NpStatus {
    guard(|| {
        let pca = handle(pca, "pca")?;
        check_len(pca.0.input_dim(), d)?;
        check_len(pca.0.q(), q)?;
        let z = pca.0.project(vector(x, d, "x")?)?;
        out_slice(out, q, "out")?.copy_from_slice(z.as_slice().expect("contiguous"));
        Ok(())
    })
}

/// Number of observations absorbed so far.
#[no_mangle]
pub unsafe extern "C" fn np_pca_count(pca: *const NpStreamingPca, out: *mut usize) -> NpStatus {
    guard(|| {
        let pca = handle(pca, "pca")?;
        *out.as_mut().ok_or_else(|| null("out"))? = pca.0.count();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn np_pca_free(pca: *mut NpStreamingPca) {
    if !pca.is_null() {
        drop(Box::from_raw(pca));
    }
}

/// Fits the offline classifier on `n` labelled rows, choosing each class
/// bandwidth by leave-one-out cross-validation on the default grid.
/// Labels are class numbers `1..=n_classes`.
#[no_mangle]
pub unsafe extern "C" fn np_offline_fit(
    x: *const f64,
    labels: *const u32,
    n: usize,
    d: usize,
    n_classes: usize,
    kernel: NpKernel,
    out: *mut *mut NpOfflineClassifier,
) -> NpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let train = dataset(x, labels, n, d, n_classes)?;
        let clf = OfflineClassifier::fit(train, &default_grid(), kernel.into(), CvMode::LeaveOneOut)?;
        *out = Box::into_raw(Box::new(NpOfflineClassifier(clf)));
        Ok(())
    })
}

/// Writes the `n_classes` posterior estimates at `x`.
#[no_mangle]
pub unsafe extern "C" fn np_offline_posterior(
    clf: *const NpOfflineClassifier,
    x: *const f64,
    d: usize,
    out: *mut f64,
    n_classes: usize,
) -> NpStatus {
    guard(|| {
        let clf = handle(clf, "clf")?;
        check_len(clf.0.n_classes(), n_classes)?;
        let p = clf.0.posterior(vector(x, d, "x")?)?;
        out_slice(out, n_classes, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn np_offline_classify(
    clf: *const NpOfflineClassifier,
    x: *const f64,
    d: usize,
    out: *mut u32,
) -> NpStatus {
    guard(|| {
        let clf = handle(clf, "clf")?;
        let g = clf.0.classify(vector(x, d, "x")?)?;
        *out.as_mut().ok_or_else(|| null("out"))? = g as u32 + 1;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn np_offline_free(clf: *mut NpOfflineClassifier) {
    if !clf.is_null() {
        drop(Box::from_raw(clf));
    }
}

/// Starts the online recursion at `m` query points from the offline estimate
/// on the `n0` head rows, with one bandwidth shared by all classes.
/// A `c_gamma` of zero or less is tuned on the head over the default grid.
#[no_mangle]
pub unsafe extern "C" fn np_online_new(
    head: *const f64,
    labels: *const u32,
    n0: usize,
    d: usize,
    n_classes: usize,
    queries: *const f64,
    m: usize,
    c_gamma: f64,
    kernel: NpKernel,
    out: *mut *mut NpOnlineState,
) -> NpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kernel = KernelId::from(kernel);
        let head = dataset(head, labels, n0, d, n_classes)?;
        let queries = matrix(queries, m, d, "queries")?;
        let c_gamma = if c_gamma > 0.0 {
            c_gamma
        } else {
            tune_c_gamma(&head, &default_c_gamma_grid(), d, kernel)?.selected
        };
        let schedule = StepSchedule::new(c_gamma, d, kernel)?;
        let bw = loo_cv_select_shared(&head, &default_grid(), kernel)?;
        let state = init_online(&head, queries, kernel, bw)?;
        *out = Box::into_raw(Box::new(NpOnlineState { state, schedule }));
        Ok(())
    })
}

/// Absorbs one labelled observation.
#[no_mangle]
pub unsafe extern "C" fn np_online_update(online: *mut NpOnlineState, x: *const f64, d: usize, label: u32) -> NpStatus {
    guard(|| {
        let online = handle_mut(online, "online")?;
        check_len(online.state.queries().ncols(), d)?;
        let x = vector(x, d, "x")?;
        let y = class_index(label, online.state.n_classes())?;
        Ok(online.state.update(&online.schedule, x, y)?)
    })
}

/// Writes the current estimates at query `query`.
#[no_mangle]
pub unsafe extern "C" fn np_online_posterior(
    online: *const NpOnlineState,
    query: usize,
    out: *mut f64,
    n_classes: usize,
) -> NpStatus {
    guard(|| {
        let online = handle(online, "online")?;
        check_len(online.state.n_classes(), n_classes)?;
        if query >= online.state.n_queries() {
            return Err(invalid(format!("query {query} outside 0..{}", online.state.n_queries())));
        }
        let row = online.state.estimates().row(query).to_vec();
        out_slice(out, n_classes, "out")?.copy_from_slice(&row);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn np_online_classify(online: *const NpOnlineState, query: usize, out: *mut u32) -> NpStatus {
    guard(|| {
        let online = handle(online, "online")?;
        let g = online.state.classify(query)?;
        *out.as_mut().ok_or_else(|| null("out"))? = g as u32 + 1;
        Ok(())
    })
}

/// Observations absorbed so far, head included.
#[no_mangle]
pub unsafe extern "C" fn np_online_count(online: *const NpOnlineState, out: *mut usize) -> NpStatus {
    guard(|| {
        let online = handle(online, "online")?;
        *out.as_mut().ok_or_else(|| null("out"))? = online.state.count();
        Ok(())
    })
}

/// JSON checkpoint of the state. Release it with `np_string_free`.
#[no_mangle]
pub unsafe extern "C" fn np_online_snapshot(online: *const NpOnlineState, out: *mut *mut c_char) -> NpStatus {
    guard(|| {
        let online = handle(online, "online")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = online.state.snapshot(online.schedule).to_json();
        *out = CString::new(json).map_err(|e| invalid(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Rebuilds a state from a checkpoint written by `np_online_snapshot`.
#[no_mangle]
pub unsafe extern "C" fn np_online_restore(json: *const c_char, out: *mut *mut NpOnlineState) -> NpStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| invalid(e.to_string()))?;
        let (state, schedule) = OnlineSnapshot::from_json(text)?.restore()?;
        *out = Box::into_raw(Box::new(NpOnlineState { state, schedule }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn np_online_free(online: *mut NpOnlineState) {
    if !online.is_null() {
        drop(Box::from_raw(online));
    }
}
