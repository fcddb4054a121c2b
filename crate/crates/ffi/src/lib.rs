//! C ABI over the appraisal crate.
//!
//! Every fallible call returns an [`AppraisalStatus`]; on failure the
//! message is available from [`appraisal_last_error`] on the same thread.
//! Matrices are row-major `double` arrays. Handles are opaque, owned by the
//! caller after creation and released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use appraisal::geostat::{KrigingModel, KrigingOptions, VariogramModel};
use appraisal::linalg::Matrix;
use appraisal::linmodel::{ols_fit, OlsFit};
use appraisal::rulefit::RuleFitModel;
use appraisal::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppraisalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    LengthMismatch = 3,
    Singular = 4,
    RankDeficient = 5,
    Parse = 6,
    MissingFeature = 7,
    Panic = 8,
    Other = 9,
}

/// Fit statistics of an OLS handle.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AppraisalOlsStats {
    pub n: usize,
    pub r2: f64,
    pub r2_adj: f64,
    pub f_stat: f64,
    pub f_pvalue: f64,
    pub durbin_watson: f64,
    pub jarque_bera: f64,
    pub jb_pvalue: f64,
    pub condition_number: f64,
}

pub struct AppraisalOls {
    fit: OlsFit,
}

pub struct AppraisalRuleFit {
    model: RuleFitModel,
    names: Vec<CString>,
}

pub struct AppraisalKriging {
    model: KrigingModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> AppraisalStatus {
    match e {
        Error::LengthMismatch { .. } => AppraisalStatus::LengthMismatch,
        Error::Singular { .. } => AppraisalStatus::Singular,
        Error::RankDeficient { .. } => AppraisalStatus::RankDeficient,
        Error::Json(_) | Error::Csv(_) | Error::MalformedHeader(_) => AppraisalStatus::Parse,
        Error::MissingFeature(_) => AppraisalStatus::MissingFeature,
        Error::InvalidInput(_) | Error::NonPositive { .. } | Error::ZeroVariance(_) => AppraisalStatus::InvalidInput,
        _ => AppraisalStatus::Other,
    }
}

struct Fail(AppraisalStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AppraisalStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AppraisalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AppraisalStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            AppraisalStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn matrix(x: *const f64, n_rows: usize, n_cols: usize) -> Result<Matrix, Fail> {
    let len = n_rows.checked_mul(n_cols).ok_or_else(|| Fail(AppraisalStatus::InvalidInput, "matrix too large".into()))?;
    let data = slice(x, len, "x")?;
    Ok(Matrix::from_row_slice(n_rows, n_cols, data))
}

unsafe fn points(xy: *const f64, n: usize) -> Result<Vec<[f64; 2]>, Fail> {
    let len = n.checked_mul(2).ok_or_else(|| Fail(AppraisalStatus::InvalidInput, "too many points".into()))?;
    Ok(slice(xy, len, "xy")?.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn appraisal_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn appraisal_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Fits `y = b0 + X b` by least squares. `x` is `n_rows × n_cols`.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` doubles, `y` `n_rows`, and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn appraisal_ols_fit(
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    y: *const f64,
    out: *mut *mut AppraisalOls,
) -> AppraisalStatus {
    guard(|| {
        let m = matrix(x, n_rows, n_cols)?;
        let y = slice(y, n_rows, "y")?;
        let names: Vec<String> = (1..=n_cols).map(|j| format!("x{j}")).collect();
        let fit = ols_fit(&m, y, &names)?;
        put(out, AppraisalOls { fit })
    })
}

/// # Safety
/// `h` must come from [`appraisal_ols_fit`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn appraisal_ols_n_features(h: *const AppraisalOls, out: *mut usize) -> AppraisalStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = h.fit.n_features();
        Ok(())
    })
}

/// Copies the intercept and `len` slope coefficients; `len` must equal the
/// feature count. `std_errors` may be null, otherwise it receives
/// `len + 1` values ordered `[intercept, slopes...]`.
///
/// # Safety
/// Output pointers must be writable for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn appraisal_ols_coefficients(
    h: *const AppraisalOls,
    intercept: *mut f64,
    coefficients: *mut f64,
    std_errors: *mut f64,
    len: usize,
) -> AppraisalStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        if len != h.fit.n_features() {
            return Err(Error::LengthMismatch { expected: h.fit.n_features(), got: len }.into());
        }
        *intercept.as_mut().ok_or_else(|| null("intercept"))? = h.fit.intercept;
        slice_mut(coefficients, len, "coefficients")?.copy_from_slice(&h.fit.coefficients);
        if !std_errors.is_null() {
            slice_mut(std_errors, len + 1, "std_errors")?.copy_from_slice(&h.fit.std_errors);
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be a live OLS handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn appraisal_ols_stats(h: *const AppraisalOls, out: *mut AppraisalOlsStats) -> AppraisalStatus {
    guard(|| {
        let f = &h.as_ref().ok_or_else(|| null("handle"))?.fit;
        *out.as_mut().ok_or_else(|| null("out"))? = AppraisalOlsStats {
            n: f.n,
            r2: f.r2,
            r2_adj: f.r2_adj,
            f_stat: f.f_stat,
            f_pvalue: f.f_pvalue,
            durbin_watson: f.durbin_watson,
            jarque_bera: f.jarque_bera,
            jb_pvalue: f.jb_pvalue,
            condition_number: f.condition_number,
        };
        Ok(())
    })
}

/// # Safety
/// `x` holds `n_rows * n_cols` doubles and `out` `n_rows` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn appraisal_ols_predict(
    h: *const AppraisalOls,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> AppraisalStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        let m = matrix(x, n_rows, n_cols)?;
        let pred = h.fit.predict(&m)?;
        slice_mut(out, n_rows, "out")?.copy_from_slice(&pred);
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`appraisal_ols_fit`], freed once.
#[no_mangle]
pub unsafe extern "C" fn appraisal_ols_free(h: *mut AppraisalOls) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Loads a RuleFit model from its JSON serialization.
///
/// # Safety
/// `json` must be a NUL-terminated UTF-8 string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn appraisal_rulefit_load_json(json: *const c_char, out: *mut *mut AppraisalRuleFit) -> AppraisalStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let s = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(AppraisalStatus::Parse, format!("model JSON is not UTF-8: {e}")))?;
        let model = RuleFitModel::from_json(s)?;
        let names = model
            .features
            .iter()
            .map(|n| CString::new(n.as_str()).map_err(|_| Fail(AppraisalStatus::Parse, "feature name contains NUL".into())))
            .collect::<Result<_, _>>()?;
        put(out, AppraisalRuleFit { model, names })
    })
}

/// # Safety
/// `h` must be a live RuleFit handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn appraisal_rulefit_n_features(h: *const AppraisalRuleFit, out: *mut usize) -> AppraisalStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = h.names.len();
        Ok(())
    })
}

/// Name of input column `i`, owned by the handle; null when out of range.
///
/// # Safety
/// `h` must be null or a live RuleFit handle.
#[no_mangle]
pub unsafe extern "C" fn appraisal_rulefit_feature_name(h: *const AppraisalRuleFit, i: usize) -> *const c_char {
    match h.as_ref().and_then(|h| h.names.get(i)) {
        Some(c) => c.as_ptr(),
        None => ptr::null(),
    }
}

/// # Safety
/// `h` must be a live RuleFit handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn appraisal_rulefit_intercept(h: *const AppraisalRuleFit, out: *mut f64) -> AppraisalStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = h.model.intercept;
        Ok(())
    })
}

/// Predicts in the model's target units. Columns of `x` follow
/// [`appraisal_rulefit_feature_name`] order.
///
/// # Safety
/// `x` holds `n_rows * n_cols` doubles and `out` `n_rows` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn appraisal_rulefit_predict(
    h: *const AppraisalRuleFit,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> AppraisalStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        if n_cols != h.model.features.len() {
            return Err(Error::LengthMismatch { expected: h.model.features.len(), got: n_cols }.into());
        }
        let m = matrix(x, n_rows, n_cols)?;
        let pred = h.model.predict(&m, &h.model.features)?;
        slice_mut(out, n_rows, "out")?.copy_from_slice(&pred);
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`appraisal_rulefit_load_json`], freed once.
#[no_mangle]
pub unsafe extern "C" fn appraisal_rulefit_free(h: *mut AppraisalRuleFit) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Ordinary kriging with an exponential variogram. `xy` holds `n` points as
/// `(x, y)` pairs in meters. `neighborhood = 0` keeps the default.
///
/// # Safety
/// `xy` holds `2n` doubles, `values` `n`, and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn appraisal_kriging_new(
    xy: *const f64,
    values: *const f64,
    n: usize,
    nugget: f64,
    partial_sill: f64,
    range: f64,
    neighborhood: usize,
    out: *mut *mut AppraisalKriging,
) -> AppraisalStatus {
    guard(|| {
        let pts = points(xy, n)?;
        let vals = slice(values, n, "values")?;
        if !(range > 0.0) || !(nugget >= 0.0) || !(partial_sill >= 0.0) {
            return Err(Error::invalid("variogram needs range > 0 and non-negative nugget and partial sill").into());
        }
        let mut options = KrigingOptions::default();
        if neighborhood > 0 {
            options.neighborhood = neighborhood;
        }
        let model = KrigingModel::new(&pts, vals, VariogramModel { nugget, partial_sill, range }, options)?;
        put(out, AppraisalKriging { model })
    })
}

/// Kriged values at `m` query points; `variances` may be null.
///
/// # Safety
/// `queries` holds `2m` doubles; `values` (and `variances` if non-null)
/// hold `m` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn appraisal_kriging_predict(
    h: *const AppraisalKriging,
    queries: *const f64,
    m: usize,
    values: *mut f64,
    variances: *mut f64,
) -> AppraisalStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        let q = points(queries, m)?;
        let res = h.model.krige(&q)?;
        let v = slice_mut(values, m, "values")?;
        for (o, r) in v.iter_mut().zip(&res) {
            *o = r.value;
        }
        if !variances.is_null() {
            for (o, r) in slice_mut(variances, m, "variances")?.iter_mut().zip(&res) {
                *o = r.variance;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`appraisal_kriging_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn appraisal_kriging_free(h: *mut AppraisalKriging) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
