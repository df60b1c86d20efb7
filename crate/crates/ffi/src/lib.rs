//! C ABI over dermgraph checkpoints.
//!
//! Every fallible function returns a [`DgStatus`]; on failure a message is
//! available from [`dg_last_error`] on the same thread. Models are opaque
//! handles created by [`dg_model_load`] and released by [`dg_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dermgraph::checkpoint::Model;
use dermgraph::scoring::{ScoreRequest, ScoreResponse, Scorer};
use dermgraph::{Error, N_ATTRIBUTES};

/// Number of checklist attributes; length of every attribute array.
pub const DG_N_ATTRIBUTES: usize = 7;
const _: () = assert!(DG_N_ATTRIBUTES == N_ATTRIBUTES);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Unreadable, malformed, or incompatible checkpoint.
    Checkpoint = 3,
    /// Metric undefined for the input, e.g. a single class.
    UndefinedMetric = 4,
    Io = 5,
    Internal = 6,
}

/// Scoring result for one attribute vector.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DgScore {
    pub traditional_score: u32,
    pub traditional_referral: bool,
    pub weighted_average: f64,
    pub melanoma_probability: f64,
    pub referral: bool,
    pub threshold_used: f64,
}

impl From<ScoreResponse> for DgScore {
    fn from(r: ScoreResponse) -> Self {
        DgScore {
            traditional_score: r.traditional_score,
            traditional_referral: r.traditional_referral,
            weighted_average: r.weighted_average,
            melanoma_probability: r.melanoma_probability,
            referral: r.referral,
            threshold_used: r.threshold_used,
        }
    }
}

/// Opaque model handle.
pub struct DgModel {
    model: Model,
    scorer: Scorer,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> DgStatus {
    match err {
        Error::Usage(_) | Error::Dimension(_) | Error::Config(_) => DgStatus::InvalidArgument,
        Error::Checkpoint(_) | Error::Format { .. } | Error::Json(_) => DgStatus::Checkpoint,
        Error::UndefinedMetric(_) => DgStatus::UndefinedMetric,
        Error::Io { .. } => DgStatus::Io,
        _ => DgStatus::Internal,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (DgStatus, String)>) -> DgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            DgStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            DgStatus::Internal
        }
    }
}

fn fail(err: Error) -> (DgStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (DgStatus, String) {
    (DgStatus::NullPointer, format!("`{name}` is null"))
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (DgStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn dg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load a checkpoint file into a new model handle written to `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dg_model_load(path: *const c_char, out: *mut *mut DgModel) -> DgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (DgStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let model = Model::load(Path::new(path)).map_err(fail)?;
        let scorer = Scorer::from_model(&model);
        *out = Box::into_raw(Box::new(DgModel { model, scorer }));
        Ok(())
    })
}

/// Release a handle from [`dg_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dg_model_free(model: *mut DgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Copy the learned attribute weights into `out[0..7]`.
///
/// # Safety
/// `model` must be a live handle; `out` must hold 7 doubles.
#[no_mangle]
pub unsafe extern "C" fn dg_model_weights(model: *const DgModel, out: *mut f64) -> DgStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let w = model.model.weights();
        ptr::copy_nonoverlapping(w.as_ptr(), out, N_ATTRIBUTES);
        Ok(())
    })
}

/// Stored melanoma referral threshold.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_model_threshold(model: *const DgModel, out: *mut f64) -> DgStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = model.model.threshold();
        Ok(())
    })
}

unsafe fn score_with(scorer: &Scorer, attrs: *const f64, len: usize, out: *mut DgScore) -> Result<(), (DgStatus, String)> {
    let attrs = slice(attrs, len, "attrs")?;
    let out = out.as_mut().ok_or_else(|| null("out"))?;
    let response = scorer
        .score(&ScoreRequest { attrs: attrs.to_vec() })
        .map_err(fail)?;
    *out = response.into();
    Ok(())
}

/// Score one attribute vector (`len` must be 7, values in [0, 1]) with the
/// model's learned weights.
///
/// # Safety
/// `model` must be a live handle, `attrs` must point to `len` doubles, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_model_score(model: *const DgModel, attrs: *const f64, len: usize, out: *mut DgScore) -> DgStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        score_with(&model.scorer, attrs, len, out)
    })
}

/// Score one attribute vector with the traditional 2/1 weights.
///
/// # Safety
/// `attrs` must point to `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_score_traditional(attrs: *const f64, len: usize, out: *mut DgScore) -> DgStatus {
    guard(|| score_with(&Scorer::traditional(), attrs, len, out))
}

/// Integer checklist score of 7 binary findings.
///
/// # Safety
/// `attrs` must point to `len` bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_traditional_score(attrs: *const u8, len: usize, out: *mut u32) -> DgStatus {
    guard(|| {
        let attrs = slice(attrs, len, "attrs")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if len != N_ATTRIBUTES || attrs.iter().any(|&a| a > 1) {
            return Err((DgStatus::InvalidArgument, format!("attrs: expected {N_ATTRIBUTES} values in {{0, 1}}")));
        }
        let a: [u8; N_ATTRIBUTES] = std::array::from_fn(|j| attrs[j]);
        *out = dermgraph::eval::traditional_score(&a);
        Ok(())
    })
}

/// Area under the ROC curve of `n` scores against 0/1 labels.
///
/// # Safety
/// `scores` and `labels` must point to `n` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> DgStatus {
    guard(|| {
        let scores = slice(scores, n, "scores")?;
        let labels = slice(labels, n, "labels")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if labels.iter().any(|&l| l > 1) {
            return Err((DgStatus::InvalidArgument, "labels must be 0 or 1".into()));
        }
        *out = dermgraph::eval::auc(scores, labels).map_err(fail)?;
        Ok(())
    })
}
