//! C ABI over the fidelity-audit toolkit.
//!
//! Every fallible function returns an [`FaStatus`]; on failure the message
//! is available from [`fa_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fidelity_audit::blackbox::{load_model, save_model, train, Blackbox, MlpConfig, ModelConfig, Predictor};
use fidelity_audit::dataset::{encode, load_dataset, EncodedDataset, FeatureSchema};
use fidelity_audit::linalg::Matrix;
use fidelity_audit::metrics::fidelity::{fidelity, gap_report, FidelityMetric, FidelityPairs};
use fidelity_audit::metrics::{auroc, preservation_check, wilcoxon_one_sided};
use fidelity_audit::sim::{closed_form_accuracy, SimParams};
use fidelity_audit::{synth, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidData = 5,
    DegenerateMetric = 6,
    SchemaMismatch = 7,
    UnsupportedVersion = 8,
    TrainingFailed = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaMetric {
    Accuracy = 0,
    Auroc = 1,
    MeanError = 2,
}

impl From<FaMetric> for FidelityMetric {
    fn from(m: FaMetric) -> Self {
        match m {
            FaMetric::Accuracy => FidelityMetric::Accuracy,
            FaMetric::Auroc => FidelityMetric::Auroc,
            FaMetric::MeanError => FidelityMetric::MeanError,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaFamily {
    Logistic = 0,
    Mlp = 1,
}

/// Gap summary; undefined values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaGaps {
    pub overall: f64,
    pub max_gap: f64,
    pub mean_pairwise_gap: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaPreservation {
    pub dp_blackbox: f64,
    pub dp_explanation: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
}

/// User decision probabilities by blackbox correctness and explanation quality.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaSimParams {
    pub wrong_good: f64,
    pub wrong_poor: f64,
    pub right_good: f64,
    pub right_poor: f64,
}

/// Encoded dataset (encoder fit on all rows).
pub struct FaDataset {
    inner: EncodedDataset,
}

pub struct FaPredictor {
    inner: Predictor,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FaStatus {
    match e {
        Error::Io { .. } => FaStatus::Io,
        Error::Csv(_) | Error::Json(_) | Error::UnparseableValue { .. } => FaStatus::Parse,
        Error::InvalidSchema(_)
        | Error::MissingColumn(_)
        | Error::EmptyDataset
        | Error::UnknownGroupLabel { .. }
        | Error::DatasetTooSmall { .. } => FaStatus::InvalidData,
        Error::DegenerateMetric(_) | Error::AllGroupsDegenerate | Error::FewerThanTwoGroups | Error::SingleGroup => {
            FaStatus::DegenerateMetric
        }
        Error::SchemaMismatch { .. } => FaStatus::SchemaMismatch,
        Error::UnsupportedVersion { .. } => FaStatus::UnsupportedVersion,
        Error::SingleClass | Error::SingularSystem => FaStatus::TrainingFailed,
        _ => FaStatus::InvalidArgument,
    }
}

struct Fail(FaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FaStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            FaStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(FaStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn groups_of(g: &[u32]) -> Vec<usize> {
    g.iter().map(|&x| x as usize).collect()
}

fn nan_if_none(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn fa_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a CSV with its JSON schema and encodes it.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_dataset_load(
    csv_path: *const c_char,
    schema_path: *const c_char,
    out: *mut *mut FaDataset,
) -> FaStatus {
    guard(|| {
        let csv = text(csv_path, "csv_path")?;
        let schema = FeatureSchema::from_json_file(text(schema_path, "schema_path")?)?;
        let ds = load_dataset(csv, &schema)?;
        let all: Vec<usize> = (0..ds.n_rows()).collect();
        let inner = encode(&ds, &all)?;
        write_out(out, Box::into_raw(Box::new(FaDataset { inner })), "out")
    })
}

/// Builds one of the bundled synthetic datasets.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_dataset_synthetic(
    name: *const c_char,
    n_rows: usize,
    seed: u64,
    out: *mut *mut FaDataset,
) -> FaStatus {
    guard(|| {
        let ds = synth::generate(text(name, "name")?, n_rows, seed)?;
        let all: Vec<usize> = (0..ds.n_rows()).collect();
        let inner = encode(&ds, &all)?;
        write_out(out, Box::into_raw(Box::new(FaDataset { inner })), "out")
    })
}

/// # Safety
/// `ds` must be null or a handle from this library that was not freed.
#[no_mangle]
pub unsafe extern "C" fn fa_dataset_free(ds: *mut FaDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_dataset_shape(ds: *const FaDataset, rows: *mut usize, cols: *mut usize) -> FaStatus {
    guard(|| {
        let d = &ds.as_ref().ok_or_else(|| null("ds"))?.inner;
        write_out(rows, d.n_rows(), "rows")?;
        write_out(cols, d.n_features(), "cols")
    })
}

/// Copies the row-major encoded feature matrix (`rows * cols` values).
///
/// # Safety
/// `ds` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fa_dataset_copy_features(ds: *const FaDataset, out: *mut f64, len: usize) -> FaStatus {
    guard(|| {
        let d = &ds.as_ref().ok_or_else(|| null("ds"))?.inner;
        let src = d.x.as_slice();
        if len != src.len() {
            return Err(Fail(FaStatus::InvalidArgument, format!("buffer holds {len}, need {}", src.len())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(src);
        Ok(())
    })
}

/// Copies labels and group ids (`rows` values each). Either output may be null.
///
/// # Safety
/// `ds` must be a live handle; non-null outputs must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn fa_dataset_copy_targets(
    ds: *const FaDataset,
    labels: *mut u8,
    groups: *mut u32,
    len: usize,
) -> FaStatus {
    guard(|| {
        let d = &ds.as_ref().ok_or_else(|| null("ds"))?.inner;
        if len != d.n_rows() {
            return Err(Fail(FaStatus::InvalidArgument, format!("buffer holds {len}, need {}", d.n_rows())));
        }
        if !labels.is_null() {
            slice_mut(labels, len, "labels")?.copy_from_slice(&d.labels);
        }
        if !groups.is_null() {
            for (o, &g) in slice_mut(groups, len, "groups")?.iter_mut().zip(&d.groups) {
                *o = g as u32;
            }
        }
        Ok(())
    })
}

/// Trains a blackbox on every row of `ds` with default hyperparameters
/// (`l2` applies to the logistic family only).
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_predictor_train(
    ds: *const FaDataset,
    family: FaFamily,
    l2: f64,
    seed: u64,
    out: *mut *mut FaPredictor,
) -> FaStatus {
    guard(|| {
        let d = &ds.as_ref().ok_or_else(|| null("ds"))?.inner;
        let cfg = match family {
            FaFamily::Logistic => ModelConfig::Logistic { l2 },
            FaFamily::Mlp => ModelConfig::Mlp(MlpConfig::default()),
        };
        let inner = train(&cfg, &d.x, &d.labels, seed)?;
        write_out(out, Box::into_raw(Box::new(FaPredictor { inner })), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_predictor_load(path: *const c_char, out: *mut *mut FaPredictor) -> FaStatus {
    guard(|| {
        let inner = load_model(text(path, "path")?)?;
        write_out(out, Box::into_raw(Box::new(FaPredictor { inner })), "out")
    })
}

/// # Safety
/// `p` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fa_predictor_save(p: *const FaPredictor, path: *const c_char) -> FaStatus {
    guard(|| {
        let m = &p.as_ref().ok_or_else(|| null("p"))?.inner;
        save_model(m, text(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from this library that was not freed.
#[no_mangle]
pub unsafe extern "C" fn fa_predictor_free(p: *mut FaPredictor) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_predictor_n_features(p: *const FaPredictor, out: *mut usize) -> FaStatus {
    guard(|| {
        let m = &p.as_ref().ok_or_else(|| null("p"))?.inner;
        write_out(out, m.n_features(), "out")
    })
}

/// Probabilities for a row-major `rows x cols` matrix.
///
/// # Safety
/// `p` must be a live handle; `x` must hold `rows * cols` doubles and
/// `out` `rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn fa_predictor_predict(
    p: *const FaPredictor,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> FaStatus {
    guard(|| {
        let m = &p.as_ref().ok_or_else(|| null("p"))?.inner;
        if cols != m.n_features() {
            return Err(Error::SchemaMismatch {
                expected: m.n_features(),
                actual: cols,
            }
            .into());
        }
        let total = rows
            .checked_mul(cols)
            .ok_or_else(|| Fail(FaStatus::InvalidArgument, "matrix size overflows".into()))?;
        let data = slice(x, total, "x")?.to_vec();
        let probs = m.predict_batch(&Matrix::from_vec(rows, cols, data)?);
        slice_mut(out, rows, "out")?.copy_from_slice(&probs);
        Ok(())
    })
}

/// Overall fidelity of explanation outputs against blackbox outputs.
///
/// # Safety
/// Both arrays must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_fidelity(
    blackbox: *const f64,
    explanation: *const f64,
    n: usize,
    metric: FaMetric,
    out: *mut f64,
) -> FaStatus {
    guard(|| {
        let pairs = FidelityPairs::new(
            slice(blackbox, n, "blackbox")?.to_vec(),
            slice(explanation, n, "explanation")?.to_vec(),
            vec![0; n],
        )?;
        write_out(out, fidelity(&pairs, metric.into())?, "out")
    })
}

/// Per-group fidelity (NaN where undefined) and gap summary.
///
/// # Safety
/// Arrays must hold `n` values; `per_group` must hold `n_groups` doubles
/// or be null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_gap_report(
    blackbox: *const f64,
    explanation: *const f64,
    groups: *const u32,
    n: usize,
    n_groups: usize,
    metric: FaMetric,
    per_group: *mut f64,
    out: *mut FaGaps,
) -> FaStatus {
    guard(|| {
        let g = groups_of(slice(groups, n, "groups")?);
        if g.iter().any(|&x| x >= n_groups) {
            return Err(Fail(FaStatus::InvalidArgument, "group id not below n_groups".into()));
        }
        let pairs = FidelityPairs::new(
            slice(blackbox, n, "blackbox")?.to_vec(),
            slice(explanation, n, "explanation")?.to_vec(),
            g,
        )?;
        let r = gap_report(&pairs, n_groups, metric.into());
        if !per_group.is_null() {
            for (o, v) in slice_mut(per_group, n_groups, "per_group")?.iter_mut().zip(&r.per_group) {
                *o = nan_if_none(*v);
            }
        }
        write_out(
            out,
            FaGaps {
                overall: nan_if_none(r.overall),
                max_gap: nan_if_none(r.max_gap),
                mean_pairwise_gap: nan_if_none(r.mean_pairwise_gap),
            },
            "out",
        )
    })
}

/// Area under the ROC curve with tie-averaged ranks.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_auroc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> FaStatus {
    guard(|| {
        let v = auroc(slice(scores, n, "scores")?, slice(labels, n, "labels")?).map_err(|e| match e {
            Error::SingleClass => Fail(FaStatus::DegenerateMetric, e.to_string()),
            other => other.into(),
        })?;
        write_out(out, v, "out")
    })
}

/// One-sided signed-rank p-value for median > 0.
///
/// # Safety
/// `samples` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_wilcoxon_one_sided(samples: *const f64, n: usize, out_p: *mut f64) -> FaStatus {
    guard(|| {
        let r = wilcoxon_one_sided(slice(samples, n, "samples")?);
        write_out(out_p, r.p_value, "out_p")
    })
}

/// Both sides of the parity-preservation identity for groups 0 and 1.
///
/// # Safety
/// Arrays must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_preservation_check(
    blackbox: *const f64,
    explanation: *const f64,
    groups: *const u32,
    n: usize,
    out: *mut FaPreservation,
) -> FaStatus {
    guard(|| {
        let g = groups_of(slice(groups, n, "groups")?);
        let pairs = FidelityPairs::new(
            slice(blackbox, n, "blackbox")?.to_vec(),
            slice(explanation, n, "explanation")?.to_vec(),
            g.clone(),
        )?;
        let c = preservation_check(&pairs, &g)?;
        write_out(
            out,
            FaPreservation {
                dp_blackbox: c.dp_blackbox,
                dp_explanation: c.dp_explanation,
                lhs: c.lhs,
                rhs: c.rhs,
                abs_diff: c.abs_diff,
            },
            "out",
        )
    })
}

/// Default decision probabilities used by the simulator.
#[no_mangle]
pub extern "C" fn fa_sim_params_default() -> FaSimParams {
    let p = SimParams::default();
    FaSimParams {
        wrong_good: p.wrong_good,
        wrong_poor: p.wrong_poor,
        right_good: p.right_good,
        right_poor: p.right_poor,
    }
}

/// Expected decision accuracy for blackbox accuracy `a` and fidelity `f`;
/// `params` may be null for the defaults.
///
/// # Safety
/// `params` must be null or point to a valid struct; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fa_closed_form_accuracy(
    a: f64,
    f: f64,
    params: *const FaSimParams,
    out: *mut f64,
) -> FaStatus {
    guard(|| {
        let p = match params.as_ref() {
            Some(p) => SimParams {
                wrong_good: p.wrong_good,
                wrong_poor: p.wrong_poor,
                right_good: p.right_good,
                right_poor: p.right_poor,
            },
            None => SimParams::default(),
        };
        p.validate()?;
        for v in [a, f] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Fail(FaStatus::InvalidArgument, format!("{v} outside [0, 1]")));
            }
        }
        write_out(out, closed_form_accuracy(a, f, &p), "out")
    })
}
