//! C ABI for training models and scoring labels.
//!
//! Every fallible function returns an [`OakStatus`]. On failure a
//! description is available from [`oak_last_error_message`] on the same
//! thread. Strings returned through out-pointers are owned by the caller and
//! must be released with [`oak_string_free`]; models with [`oak_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use oakcrowd::dataset::{ingest, read_records, AuditorRecord, Record};
use oakcrowd::multipoint::{item_labels, run_pipeline};
use oakcrowd::{
    AggregationMode, Error, Estimator, EstimatorKind, Label, Model, Partitioner, SimilarityFn, TrainConfig,
};
use serde::Deserialize;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OakStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or JSONL.
    Parse = 3,
    /// Well-formed input violating a data invariant.
    Validation = 4,
    InvalidArgument = 5,
    /// Not enough data to estimate something.
    Degenerate = 6,
    /// The model lacks a block the requested estimator needs.
    MissingBlock = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
    Internal = 9,
}

/// Opaque trained model.
pub struct OakModel {
    model: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(OakStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Format { .. } | Error::Json(_) => OakStatus::Parse,
            Error::Validation(_) | Error::KindMismatch { .. } => OakStatus::Validation,
            Error::InvalidArgument(_) => OakStatus::InvalidArgument,
            Error::Degenerate(_) => OakStatus::Degenerate,
            Error::MissingBlock(_) => OakStatus::MissingBlock,
            Error::Io(_) => OakStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(OakStatus::Parse, e.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OakStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OakStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            OakStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(OakStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(OakStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn model_ref<'a>(p: *const OakModel) -> Result<&'a Model, Failure> {
    p.as_ref()
        .map(|m| &m.model)
        .ok_or_else(|| Failure(OakStatus::NullPointer, "model is null".into()))
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(OakStatus::NullPointer, "output pointer is null".into()))
}

unsafe fn thresholds(p: *const f64, n: usize) -> Result<Vec<f64>, Failure> {
    if n == 0 {
        return Ok(vec![1.0]);
    }
    if p.is_null() {
        return Err(Failure(OakStatus::NullPointer, "thresholds is null".into()));
    }
    Ok(std::slice::from_raw_parts(p, n).to_vec())
}

fn into_c(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(OakStatus::Internal, "output contains a NUL byte".into()))
}

/// Training options accepted by [`oak_train_jsonl`]; every field is optional.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainOptions {
    estimator: EstimatorKind,
    aggregation: AggregationMode,
    partitioner: String,
    similarity: Option<SimilarityFn>,
    gamma: Option<f64>,
    alpha_semi: Option<f64>,
    lambda: Option<f64>,
    multipoint: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            estimator: EstimatorKind::Oak,
            aggregation: AggregationMode::Weight,
            partitioner: "default".into(),
            similarity: None,
            gamma: None,
            alpha_semi: None,
            lambda: None,
            multipoint: None,
        }
    }
}

/// Parses a model from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn oak_model_from_json(json: *const c_char, out: *mut *mut OakModel) -> OakStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let model = Model::from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(OakModel { model }));
        Ok(())
    })
}

/// Serializes a model; free the result with [`oak_string_free`].
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oak_model_to_json(model: *const OakModel, out: *mut *mut c_char) -> OakStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        *out = into_c(model_ref(model)?.to_json())?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn oak_model_free(model: *mut OakModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oak_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Description of the last failure on the calling thread (empty after a
/// success). Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn oak_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Trains a model from annotation and auditor records (JSONL).
/// `options_json` may be null; otherwise a JSON object with any of
/// `estimator`, `aggregation`, `partitioner`, `similarity`, `gamma`,
/// `alpha_semi`, `lambda` and `multipoint`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oak_train_jsonl(
    records_jsonl: *const c_char,
    options_json: *const c_char,
    out: *mut *mut OakModel,
) -> OakStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let opts: TrainOptions = if options_json.is_null() {
            TrainOptions::default()
        } else {
            serde_json::from_str(text(options_json, "options")?)?
        };
        let records = read_records(text(records_jsonl, "records")?.as_bytes())?;
        let ds = ingest(records, std::iter::empty::<AuditorRecord>())?;
        let kind = ds
            .label_kind()
            .ok_or_else(|| Failure(OakStatus::Degenerate, "no annotations".into()))?;
        let mut cfg = TrainConfig::new(opts.estimator, opts.similarity.unwrap_or(SimilarityFn::for_kind(kind)));
        cfg.partitioner = Some(Partitioner::from_key(&opts.partitioner, kind, ds.meta())?);
        cfg.gamma = opts.gamma.unwrap_or(cfg.gamma);
        cfg.alpha_semi = opts.alpha_semi.unwrap_or(cfg.alpha_semi);
        cfg.lambda = opts.lambda.unwrap_or(cfg.lambda);
        cfg.multipoint = opts.multipoint;
        cfg.aggregation = opts.aggregation;
        cfg.sim.validate()?;
        *out = Box::into_raw(Box::new(OakModel {
            model: oakcrowd::train(&ds, &cfg)?,
        }));
        Ok(())
    })
}

/// Runs the stopping pipeline over every item in `annotations_jsonl` and
/// writes one prediction per line to `out`. `thresholds[t - 1]` is the stop
/// threshold after `t` labels; with `n_thresholds == 0` every label is used.
///
/// # Safety
/// `thresholds` must point to `n_thresholds` doubles; strings must be
/// NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oak_estimate_jsonl(
    model: *const OakModel,
    annotations_jsonl: *const c_char,
    thresholds_ptr: *const f64,
    n_thresholds: usize,
    out: *mut *mut c_char,
) -> OakStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let est = Estimator::from_model(model_ref(model)?)?;
        let taus = thresholds(thresholds_ptr, n_thresholds)?;
        let records: Vec<Record> = read_records(text(annotations_jsonl, "annotations")?.as_bytes())?
            .into_iter()
            .filter(|r| matches!(r, Record::Annotation(_)))
            .collect();
        let ds = ingest(records, std::iter::empty::<AuditorRecord>())?;
        let mut lines = String::new();
        for item in ds.items() {
            let p = run_pipeline(&item.id, &item_labels(&ds, item), &est, &taus)?;
            lines.push_str(&serde_json::to_string(&p)?);
            lines.push('\n');
        }
        *out = into_c(lines)?;
        Ok(())
    })
}

/// Estimated accuracy of `worker` when reporting `label_json` (a label
/// object such as `{"kind":"cat","v":"A"}`). A null label gives the
/// type-independent estimate.
///
/// # Safety
/// `model` must come from this library; strings must be NUL-terminated or
/// null where allowed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oak_worker_confidence(
    model: *const OakModel,
    worker: *const c_char,
    label_json: *const c_char,
    out: *mut f64,
) -> OakStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let est = Estimator::from_model(model_ref(model)?)?;
        let worker = text(worker, "worker")?;
        *out = if label_json.is_null() {
            est.confidence(worker, None)
        } else {
            let label: Label = serde_json::from_str(text(label_json, "label")?)?;
            est.label_confidence(worker, &label)
        };
        Ok(())
    })
}

/// Similarity of two labels under `similarity_json` (e.g. `{"fn":"jaccard"}`).
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oak_similarity(
    similarity_json: *const c_char,
    a_json: *const c_char,
    b_json: *const c_char,
    out: *mut f64,
) -> OakStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let sim: SimilarityFn = serde_json::from_str(text(similarity_json, "similarity")?)?;
        sim.validate()?;
        let a: Label = serde_json::from_str(text(a_json, "a")?)?;
        let b: Label = serde_json::from_str(text(b_json, "b")?)?;
        *out = sim.sim(&a, &b)?;
        Ok(())
    })
}
