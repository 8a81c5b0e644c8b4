//! C ABI for linforest.
//!
//! Datasets and forests cross the boundary as opaque handles that the caller
//! releases with the matching `*_free` function. Every fallible call returns an
//! [`LfStatus`]; on failure [`lf_last_error`] describes the most recent error
//! raised on the calling thread. Panics never unwind into C: they are caught
//! and reported as `LF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use linforest::dot::export_dot;
use linforest::{Column, Dataset, Error, Forest, HyperParams};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Schema = 6,
    Model = 7,
    Panic = 8,
}

/// Opaque dataset handle.
pub struct LfDataset(Dataset);

/// Opaque forest handle.
pub struct LfForest(Forest);

/// Forest hyperparameters. Fill with `lf_params_default` and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LfParams {
    pub ntree: usize,
    /// Candidate features per node; 0 picks max(1, d/3).
    pub mtry: usize,
    pub lambda: f64,
    pub min_split_gain: f64,
    pub folds: usize,
    pub nodesize_spl: usize,
    pub sample_fraction: f64,
    pub splitratio: f64,
    pub honest: bool,
    pub seed: u64,
    /// Worker threads for training; 0 uses all cores.
    pub threads: usize,
}

impl From<&LfParams> for HyperParams {
    fn from(p: &LfParams) -> Self {
        HyperParams {
            ntree: p.ntree,
            mtry: (p.mtry > 0).then_some(p.mtry),
            lambda: p.lambda,
            min_split_gain: p.min_split_gain,
            folds: p.folds,
            nodesize_spl: p.nodesize_spl,
            sample_fraction: p.sample_fraction,
            splitratio: p.splitratio,
            honest: p.honest,
            lin: None,
            seed: p.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> LfStatus {
    match e {
        Error::Io { .. } => LfStatus::Io,
        Error::Csv(_) | Error::Load { .. } | Error::MissingColumn(_) => LfStatus::Parse,
        Error::Config(_) => LfStatus::Config,
        Error::Schema { .. } => LfStatus::Schema,
        Error::Model(_) => LfStatus::Model,
        Error::EmptyTestSet => LfStatus::InvalidArgument,
    }
}

struct Fail(LfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LfStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LfStatus::Ok
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
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LfStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or "" after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn lf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Writes the library defaults into `*out`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `LfParams`.
#[no_mangle]
pub unsafe extern "C" fn lf_params_default(out: *mut LfParams) -> LfStatus {
    guard(|| {
        let d = HyperParams::default();
        *out_arg(out, "out")? = LfParams {
            ntree: d.ntree,
            mtry: d.mtry.unwrap_or(0),
            lambda: d.lambda,
            min_split_gain: d.min_split_gain,
            folds: d.folds,
            nodesize_spl: d.nodesize_spl,
            sample_fraction: d.sample_fraction,
            splitratio: d.splitratio,
            honest: d.honest,
            seed: d.seed,
            threads: 0,
        };
        Ok(())
    })
}

/// Loads a CSV with a header row. `categorical` is a comma-separated list of
/// column names to read as categorical, or null for none.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_load_csv(
    path: *const c_char,
    target: *const c_char,
    categorical: *const c_char,
    out: *mut *mut LfDataset,
) -> LfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let target = str_arg(target, "target")?;
        let cats: Vec<&str> = if categorical.is_null() {
            Vec::new()
        } else {
            str_arg(categorical, "categorical")?
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect()
        };
        let ds = Dataset::load_csv(path, target, &cats)?;
        *out = Box::into_raw(Box::new(LfDataset(ds)));
        Ok(())
    })
}

/// Builds a numeric dataset from a row-major `n_rows` x `n_features` matrix.
/// Columns are named X1..Xd and the response y.
///
/// # Safety
/// `x` must hold `n_rows * n_features` doubles and `y` `n_rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_from_matrix(
    x: *const f64,
    n_rows: usize,
    n_features: usize,
    y: *const f64,
    out: *mut *mut LfDataset,
) -> LfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if n_rows == 0 || n_features == 0 {
            return Err(Fail(LfStatus::InvalidArgument, "empty matrix".into()));
        }
        let len = n_rows
            .checked_mul(n_features)
            .ok_or_else(|| Fail(LfStatus::InvalidArgument, "matrix size overflows".into()))?;
        let x = slice_arg(x, len, "x")?;
        let y = slice_arg(y, n_rows, "y")?;
        let columns = (0..n_features)
            .map(|j| Column::numeric(format!("X{}", j + 1), (0..n_rows).map(|i| x[i * n_features + j]).collect()))
            .collect();
        let ds = Dataset::new(columns, "y", y.to_vec())?;
        *out = Box::into_raw(Box::new(LfDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_n_rows(ds: *const LfDataset, out: *mut usize) -> LfStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(ds, "dataset")?.0.n_rows();
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_n_features(ds: *const LfDataset, out: *mut usize) -> LfStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(ds, "dataset")?.0.n_features();
        Ok(())
    })
}

/// Releases a dataset. Null is ignored.
///
/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_dataset_free(ds: *mut LfDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Trains a forest on every column of `ds` except the response.
///
/// # Safety
/// `ds` and `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_forest_train(
    ds: *const LfDataset,
    params: *const LfParams,
    out: *mut *mut LfForest,
) -> LfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ds = &ref_arg(ds, "dataset")?.0;
        let params = ref_arg(params, "params")?;
        let threads = (params.threads > 0).then_some(params.threads);
        let forest = Forest::train_with_threads(ds, &HyperParams::from(params), threads)?;
        *out = Box::into_raw(Box::new(LfForest(forest)));
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_forest_load(path: *const c_char, out: *mut *mut LfForest) -> LfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let forest = Forest::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(LfForest(forest)));
        Ok(())
    })
}

/// # Safety
/// `forest` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lf_forest_save(forest: *const LfForest, path: *const c_char) -> LfStatus {
    guard(|| {
        ref_arg(forest, "forest")?.0.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `forest` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_forest_n_trees(forest: *const LfForest, out: *mut usize) -> LfStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(forest, "forest")?.0.ntree();
        Ok(())
    })
}

/// Number of feature columns a row passed to `lf_forest_predict_rows` must have.
///
/// # Safety
/// `forest` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_forest_n_features(forest: *const LfForest, out: *mut usize) -> LfStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(forest, "forest")?.0.schema.len();
        Ok(())
    })
}

/// Predicts every row of `ds`, matching columns by name. `out` must have room
/// for `out_len` doubles and `out_len` must equal the number of rows.
///
/// # Safety
/// Handles must be live; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lf_forest_predict(
    forest: *const LfForest,
    ds: *const LfDataset,
    out: *mut f64,
    out_len: usize,
) -> LfStatus {
    guard(|| {
        let forest = &ref_arg(forest, "forest")?.0;
        let ds = &ref_arg(ds, "dataset")?.0;
        if out_len != ds.n_rows() {
            return Err(Fail(
                LfStatus::InvalidArgument,
                format!("out_len is {out_len} but the dataset has {} rows", ds.n_rows()),
            ));
        }
        if out.is_null() && out_len > 0 {
            return Err(null("out"));
        }
        let pred = forest.predict_dataset(ds)?;
        ptr::copy_nonoverlapping(pred.as_ptr(), out, pred.len());
        Ok(())
    })
}

/// Predicts a row-major block of already encoded rows (training column order;
/// categorical cells hold the training level index, or -1 for an unseen level).
///
/// # Safety
/// `x` must hold `n_rows * n_features` doubles and `out` `n_rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn lf_forest_predict_rows(
    forest: *const LfForest,
    x: *const f64,
    n_rows: usize,
    n_features: usize,
    out: *mut f64,
) -> LfStatus {
    guard(|| {
        let forest = &ref_arg(forest, "forest")?.0;
        if n_features != forest.schema.len() {
            return Err(Fail(
                LfStatus::Schema,
                format!("model expects {} features, got {n_features}", forest.schema.len()),
            ));
        }
        let len = n_rows
            .checked_mul(n_features)
            .ok_or_else(|| Fail(LfStatus::InvalidArgument, "matrix size overflows".into()))?;
        let x = slice_arg(x, len, "x")?;
        if out.is_null() && n_rows > 0 {
            return Err(null("out"));
        }
        for (i, row) in x.chunks_exact(n_features).enumerate() {
            *out.add(i) = forest.predict_row(row);
        }
        Ok(())
    })
}

/// Renders tree `tree` as Graphviz DOT. Release the string with `lf_string_free`.
///
/// # Safety
/// `forest` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_forest_export_dot(forest: *const LfForest, tree: usize, out: *mut *mut c_char) -> LfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let forest = &ref_arg(forest, "forest")?.0;
        let record = forest.trees.get(tree).ok_or_else(|| {
            Fail(
                LfStatus::InvalidArgument,
                format!("tree index {tree} out of range ({} trees)", forest.ntree()),
            )
        })?;
        let text = export_dot(&record.root, &forest.schema, &forest.lin);
        *out = CString::new(text).expect("DOT has no NUL").into_raw();
        Ok(())
    })
}

/// Releases a forest. Null is ignored.
///
/// # Safety
/// `forest` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_forest_free(forest: *mut LfForest) {
    if !forest.is_null() {
        drop(Box::from_raw(forest));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
