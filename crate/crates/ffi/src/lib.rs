//! C interface for the variable selection library.
//!
//! Every function is callable from C through the generated `varsel.h`
//! header. Fitted models are passed around as opaque [`VsModel`] handles
//! that the caller owns and must release with [`vs_model_free`]. Functions
//! report failures through [`VsStatus`]; the message behind the most recent
//! failure on the current thread is available from
//! [`vs_last_error_message`].
//!
//! Matrices cross the boundary as row-major `double` buffers (sample by
//! sample), the natural layout for C callers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::slice;

use nalgebra::{DMatrix, DVector};
use varsel::io::{load_fit, save_fit};
use varsel::predict::{predict_linear, predict_logistic};
use varsel::{
    bayes_factor, fit, Dataset, Error, Family, FitOptions, HyperGrid, HyperSetting, LogOddsGrid,
    ModelFit,
};

/// Outcome of a call. Anything but `Ok` leaves a human-readable
/// explanation in `vs_last_error_message`.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VsStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// Arguments were structurally invalid (bad sizes, flags, grids).
    Usage = 3,
    /// The data failed validation against the model or its own shape.
    Data = 4,
    /// The computation broke down numerically.
    Numerical = 5,
    /// A file could not be read or written.
    Io = 6,
    /// An internal invariant failed; the library state is still sound.
    Panic = 7,
}

/// Fitting knobs mirrored from the library. Three-state `int` flags accept
/// -1 (decide from the grid), 0 (off) and 1 (on).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct VsFitOptions {
    /// Convergence tolerance on the variational bound.
    pub tol: f64,
    /// Iteration cap per grid point.
    pub maxiter: u64,
    /// Re-estimate the residual variance (-1/0/1).
    pub update_sigma: i32,
    /// Re-estimate the prior effect variance (-1/0/1).
    pub update_sa: i32,
    /// Re-optimize the logistic approximation factors (-1/0/1).
    pub optimize_eta: i32,
    /// Run the second stage that restarts every grid point from the best
    /// first-stage fit (0/1).
    pub initialize_params: i32,
    /// Pseudo-observations shrinking the estimated prior effect variance.
    pub n0: f64,
    /// Shrinkage target for the prior effect variance.
    pub sa0: f64,
    /// Posterior draws behind the variance-explained estimate.
    pub nr: u64,
    /// Seed for every randomized summary.
    pub seed: u64,
}

/// A fitted model. Opaque to C; create with `vs_fit` or `vs_load`, release
/// with `vs_model_free`.
pub struct VsModel {
    inner: ModelFit,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: VsStatus, msg: &str) -> VsStatus {
    set_error(msg);
    status
}

fn fail_with(err: &Error) -> VsStatus {
    let status = match err {
        Error::Usage(_) => VsStatus::Usage,
        Error::Data(_) => VsStatus::Data,
        Error::Numerical(_) => VsStatus::Numerical,
        Error::Io { .. } => VsStatus::Io,
    };
    fail(status, &err.to_string())
}

/// Runs `body` with panics converted into `VsStatus::Panic`.
fn guarded(body: impl FnOnce() -> VsStatus) -> VsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(VsStatus::Panic, &format!("internal error: {msg}"))
        }
    }
}

/// Builds a row-major matrix view, rejecting overflowing extents.
unsafe fn matrix_from(ptr: *const f64, rows: usize, cols: usize) -> Result<DMatrix<f64>, VsStatus> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| fail(VsStatus::Usage, "matrix extent overflows"))?;
    if ptr.is_null() {
        return Err(fail(VsStatus::NullArgument, "matrix pointer is null"));
    }
    Ok(DMatrix::from_row_slice(rows, cols, slice::from_raw_parts(ptr, len)))
}

fn flag(value: i32, name: &str) -> Result<Option<bool>, VsStatus> {
    match value {
        -1 => Ok(None),
        0 => Ok(Some(false)),
        1 => Ok(Some(true)),
        other => Err(fail(
            VsStatus::Usage,
            &format!("{name} must be -1, 0 or 1, got {other}"),
        )),
    }
}

fn family_from(code: i32) -> Result<Family, VsStatus> {
    match code {
        0 => Ok(Family::Gaussian),
        1 => Ok(Family::Binomial),
        other => Err(fail(
            VsStatus::Usage,
            &format!("family must be 0 (gaussian) or 1 (binomial), got {other}"),
        )),
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, VsStatus> {
    if ptr.is_null() {
        return Err(fail(VsStatus::NullArgument, "path is null"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail(VsStatus::Utf8, "path is not valid UTF-8")),
    }
}

unsafe fn model_ref<'a>(ptr: *const VsModel) -> Result<&'a ModelFit, VsStatus> {
    if ptr.is_null() {
        return Err(fail(VsStatus::NullArgument, "model handle is null"));
    }
    Ok(&(*ptr).inner)
}

/// Copies `src` into `dst` after checking the announced capacity.
unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize, what: &str) -> VsStatus {
    if dst.is_null() {
        return fail(VsStatus::NullArgument, "output buffer is null");
    }
    if len != src.len() {
        return fail(
            VsStatus::Usage,
            &format!("{what} holds {} values but the buffer announces {len}", src.len()),
        );
    }
    slice::from_raw_parts_mut(dst, len).copy_from_slice(src);
    VsStatus::Ok
}

/// Fills `options` with the library defaults.
///
/// # Safety
/// `options` must point to writable memory for one `VsFitOptions`.
#[no_mangle]
pub unsafe extern "C" fn vs_fit_options_default(options: *mut VsFitOptions) -> VsStatus {
    if options.is_null() {
        return fail(VsStatus::NullArgument, "options pointer is null");
    }
    let d = FitOptions::default();
    *options = VsFitOptions {
        tol: d.tol,
        maxiter: d.maxiter as u64,
        update_sigma: -1,
        update_sa: -1,
        optimize_eta: -1,
        initialize_params: i32::from(d.initialize_params),
        n0: d.n0,
        sa0: d.sa0,
        nr: d.nr as u64,
        seed: d.seed,
    };
    VsStatus::Ok
}

/// Fits the model over a hyperparameter grid.
///
/// `x` is the row-major `n` by `p` variable matrix and `y` the length-`n`
/// outcome. `z` may be null when `n_z` is 0, otherwise it is a row-major
/// `n` by `n_z` covariate matrix (without an intercept column, which is
/// always included). `family` is 0 for gaussian, 1 for binomial. `logodds`
/// gives the `n_s` prior log-odds grid points shared by all variables.
/// `sigma` and `sa` are either null (estimate the hyperparameter) or
/// length-`n_s` arrays fixing it per grid point. A null `options` uses the
/// defaults. On success `*out` owns the fitted model.
///
/// # Safety
/// All non-null pointers must be valid for the extents announced by the
/// size arguments, and `out` must point to writable pointer storage.
#[no_mangle]
pub unsafe extern "C" fn vs_fit(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    z: *const f64,
    n_z: usize,
    family: i32,
    logodds: *const f64,
    n_s: usize,
    sigma: *const f64,
    sa: *const f64,
    options: *const VsFitOptions,
    out: *mut *mut VsModel,
) -> VsStatus {
    guarded(|| {
        if out.is_null() {
            return fail(VsStatus::NullArgument, "output handle is null");
        }
        if y.is_null() {
            return fail(VsStatus::NullArgument, "outcome pointer is null");
        }
        if logodds.is_null() {
            return fail(VsStatus::NullArgument, "log-odds pointer is null");
        }
        let xm = match matrix_from(x, n, p) {
            Ok(m) => m,
            Err(status) => return status,
        };
        let zm = if n_z == 0 {
            None
        } else {
            match matrix_from(z, n, n_z) {
                Ok(m) => Some(m),
                Err(status) => return status,
            }
        };
        let yv = DVector::from_column_slice(slice::from_raw_parts(y, n));
        let fam = match family_from(family) {
            Ok(f) => f,
            Err(status) => return status,
        };
        let ds = match Dataset::new(xm, zm, yv, fam) {
            Ok(ds) => ds,
            Err(e) => return fail_with(&e),
        };

        let setting = |ptr: *const f64| -> HyperSetting {
            if ptr.is_null() {
                HyperSetting::Estimate
            } else {
                HyperSetting::Fixed(slice::from_raw_parts(ptr, n_s).to_vec())
            }
        };
        let grid = HyperGrid {
            sigma: setting(sigma),
            sa: setting(sa),
            logodds: LogOddsGrid::Shared(slice::from_raw_parts(logodds, n_s).to_vec()),
        };

        let mut opts = FitOptions::default();
        if !options.is_null() {
            let o = &*options;
            opts.tol = o.tol;
            opts.maxiter = o.maxiter as usize;
            opts.update_sigma = match flag(o.update_sigma, "update_sigma") {
                Ok(v) => v,
                Err(status) => return status,
            };
            opts.update_sa = match flag(o.update_sa, "update_sa") {
                Ok(v) => v,
                Err(status) => return status,
            };
            opts.optimize_eta = match flag(o.optimize_eta, "optimize_eta") {
                Ok(v) => v,
                Err(status) => return status,
            };
            opts.initialize_params = match o.initialize_params {
                0 => false,
                1 => true,
                other => {
                    return fail(
                        VsStatus::Usage,
                        &format!("initialize_params must be 0 or 1, got {other}"),
                    )
                }
            };
            opts.n0 = o.n0;
            opts.sa0 = o.sa0;
            opts.nr = o.nr as usize;
            opts.seed = o.seed;
        }

        match fit(&ds, &grid, &opts) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(VsModel { inner: model }));
                VsStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases a model handle. Null is allowed and ignored.
///
/// # Safety
/// `model` must be a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn vs_model_free(model: *mut VsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of samples the model was fitted to, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vs_model_n_samples(model: *const VsModel) -> usize {
    model_ref(model).map_or(0, |m| m.n)
}

/// Number of candidate variables, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vs_model_n_variables(model: *const VsModel) -> usize {
    model_ref(model).map_or(0, |m| m.p)
}

/// Number of hyperparameter grid points, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vs_model_n_grid_points(model: *const VsModel) -> usize {
    model_ref(model).map_or(0, |m| m.n_grid_points())
}

/// Model family: 0 gaussian, 1 binomial, -1 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vs_model_family(model: *const VsModel) -> i32 {
    match model_ref(model) {
        Ok(m) => match m.family {
            Family::Gaussian => 0,
            Family::Binomial => 1,
        },
        Err(_) => -1,
    }
}

/// Copies the posterior inclusion probabilities into `out` (`len` must be
/// the number of variables).
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vs_model_pip(
    model: *const VsModel,
    out: *mut f64,
    len: usize,
) -> VsStatus {
    guarded(|| match model_ref(model) {
        Ok(m) => copy_out(&m.pip, out, len, "pip"),
        Err(status) => status,
    })
}

/// Copies the model-averaged coefficients into `out` (`len` must be the
/// number of variables).
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vs_model_beta_mean(
    model: *const VsModel,
    out: *mut f64,
    len: usize,
) -> VsStatus {
    guarded(|| match model_ref(model) {
        Ok(m) => copy_out(&m.beta_mean, out, len, "beta_mean"),
        Err(status) => status,
    })
}

/// Copies the normalized grid-point weights into `out` (`len` must be the
/// number of grid points).
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vs_model_weights(
    model: *const VsModel,
    out: *mut f64,
    len: usize,
) -> VsStatus {
    guarded(|| match model_ref(model) {
        Ok(m) => copy_out(&m.w, out, len, "weights"),
        Err(status) => status,
    })
}

/// Copies the per-grid-point variational bounds into `out` (`len` must be
/// the number of grid points).
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vs_model_logw(
    model: *const VsModel,
    out: *mut f64,
    len: usize,
) -> VsStatus {
    guarded(|| match model_ref(model) {
        Ok(m) => copy_out(&m.fits.logw, out, len, "logw"),
        Err(status) => status,
    })
}

/// Predicts for `n_new` samples. `x` is row-major `n_new` by `p` with the
/// training variable count, and `z`/`n_z` follow the `vs_fit` covariate
/// convention. Gaussian models write predicted outcomes, binomial models
/// write probabilities of the positive class. `len` must equal `n_new`.
///
/// # Safety
/// All non-null pointers must be valid for the announced extents.
#[no_mangle]
pub unsafe extern "C" fn vs_predict(
    model: *const VsModel,
    x: *const f64,
    n_new: usize,
    p: usize,
    z: *const f64,
    n_z: usize,
    out: *mut f64,
    len: usize,
) -> VsStatus {
    guarded(|| {
        let m = match model_ref(model) {
            Ok(m) => m,
            Err(status) => return status,
        };
        if len != n_new {
            return fail(
                VsStatus::Usage,
                &format!("output buffer announces {len} values for {n_new} samples"),
            );
        }
        let xm = match matrix_from(x, n_new, p) {
            Ok(mat) => mat,
            Err(status) => return status,
        };
        let zm = if n_z == 0 {
            None
        } else {
            match matrix_from(z, n_new, n_z) {
                Ok(mat) => Some(mat),
                Err(status) => return status,
            }
        };
        let values = match m.family {
            Family::Gaussian => predict_linear(m, &xm, zm.as_ref()),
            Family::Binomial => predict_logistic(m, &xm, zm.as_ref()).map(|pred| pred.prob),
        };
        match values {
            Ok(v) => copy_out(&v, out, len, "predictions"),
            Err(e) => fail_with(&e),
        }
    })
}

/// Writes the model to `path` in the library archive format.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vs_save(model: *const VsModel, path: *const c_char) -> VsStatus {
    guarded(|| {
        let m = match model_ref(model) {
            Ok(m) => m,
            Err(status) => return status,
        };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match save_fit(&path, m) {
            Ok(()) => VsStatus::Ok,
            Err(e) => fail_with(&e),
        }
    })
}

/// Loads a model archive from `path`. On success `*out` owns the handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable pointer
/// storage.
#[no_mangle]
pub unsafe extern "C" fn vs_load(path: *const c_char, out: *mut *mut VsModel) -> VsStatus {
    guarded(|| {
        if out.is_null() {
            return fail(VsStatus::NullArgument, "output handle is null");
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_fit(&path) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(VsModel { inner: model }));
                VsStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Bayes factor for `alt` against `null`; both must come from the same
/// dataset.
///
/// # Safety
/// Both handles must be live and `out` writable for one double.
#[no_mangle]
pub unsafe extern "C" fn vs_bayes_factor(
    null_model: *const VsModel,
    alt_model: *const VsModel,
    out: *mut f64,
) -> VsStatus {
    guarded(|| {
        let (nm, am) = match (model_ref(null_model), model_ref(alt_model)) {
            (Ok(nm), Ok(am)) => (nm, am),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        if out.is_null() {
            return fail(VsStatus::NullArgument, "output pointer is null");
        }
        match bayes_factor(nm, am) {
            Ok(bf) => {
                *out = bf;
                VsStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Message behind the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn vs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
