//! Exercises the C interface from Rust: handle lifecycle, buffer copies,
//! status codes, archive round trips, and the generated header itself.

use std::ffi::CStr;
use std::ffi::CString;
use std::process::Command;
use std::ptr;

use nalgebra::{DMatrix, DVector};
use tempfile::tempdir;
use varsel::{fit, Dataset, Family, FitOptions, HyperGrid, HyperSetting, LogOddsGrid};
use varsel_ffi::*;

/// Splitmix-style generator; plenty to decorrelate a toy design.
fn next_unit(seed: &mut u64) -> f64 {
    *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    ((*seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5
}

/// Row-major design with a planted signal in the first and last columns.
fn toy_data(n: usize, p: usize, binary: bool) -> (Vec<f64>, Vec<f64>) {
    let mut seed = 42;
    let x: Vec<f64> = (0..n * p).map(|_| next_unit(&mut seed)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let lin = 3.0 * x[i * p] - 2.0 * x[i * p + p - 1] + 0.1 * next_unit(&mut seed);
            if binary {
                f64::from(lin > 0.0)
            } else {
                lin
            }
        })
        .collect();
    (x, y)
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(vs_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

/// Fits the toy problem through the C interface and hands back the handle.
fn fit_handle(binary: bool) -> *mut VsModel {
    let (x, y) = toy_data(40, 4, binary);
    let logodds = [-1.5, -1.0, -0.5];
    let mut model: *mut VsModel = ptr::null_mut();
    let status = unsafe {
        vs_fit(
            x.as_ptr(),
            40,
            4,
            y.as_ptr(),
            ptr::null(),
            0,
            i32::from(binary),
            logodds.as_ptr(),
            3,
            ptr::null(),
            ptr::null(),
            ptr::null(),
            &mut model,
        )
    };
    assert_eq!(status, VsStatus::Ok, "{}", last_error());
    assert!(!model.is_null());
    model
}

#[test]
fn defaults_round_trip() {
    let mut opts = VsFitOptions {
        tol: 0.0,
        maxiter: 0,
        update_sigma: 9,
        update_sa: 9,
        optimize_eta: 9,
        initialize_params: 9,
        n0: 0.0,
        sa0: 0.0,
        nr: 0,
        seed: 0,
    };
    assert_eq!(unsafe { vs_fit_options_default(&mut opts) }, VsStatus::Ok);
    assert_eq!(opts.tol, 1e-4);
    assert_eq!(opts.maxiter, 10000);
    assert_eq!(opts.update_sigma, -1);
    assert_eq!(opts.update_sa, -1);
    assert_eq!(opts.optimize_eta, -1);
    assert_eq!(opts.initialize_params, 1);
    assert_eq!(opts.n0, 10.0);
    assert_eq!(opts.sa0, 1.0);
    assert_eq!(opts.nr, 1000);
    assert_eq!(opts.seed, 1);
    assert_eq!(
        unsafe { vs_fit_options_default(ptr::null_mut()) },
        VsStatus::NullArgument
    );
}

#[test]
fn fitting_matches_the_library_exactly() {
    let model = fit_handle(false);
    let (p, n_s) = unsafe {
        (
            vs_model_n_variables(model),
            vs_model_n_grid_points(model),
        )
    };
    assert_eq!(p, 4);
    assert_eq!(n_s, 3);
    assert_eq!(unsafe { vs_model_n_samples(model) }, 40);
    assert_eq!(unsafe { vs_model_family(model) }, 0);

    let mut pip = vec![0.0; p];
    let mut beta = vec![0.0; p];
    let mut w = vec![0.0; n_s];
    let mut logw = vec![0.0; n_s];
    unsafe {
        assert_eq!(vs_model_pip(model, pip.as_mut_ptr(), p), VsStatus::Ok);
        assert_eq!(vs_model_beta_mean(model, beta.as_mut_ptr(), p), VsStatus::Ok);
        assert_eq!(vs_model_weights(model, w.as_mut_ptr(), n_s), VsStatus::Ok);
        assert_eq!(vs_model_logw(model, logw.as_mut_ptr(), n_s), VsStatus::Ok);
    }

    // The same fit through the Rust API is deterministic, so every copied
    // value must agree to the last bit.
    let (x, y) = toy_data(40, 4, false);
    let ds = Dataset::new(
        DMatrix::from_row_slice(40, 4, &x),
        None,
        DVector::from_column_slice(&y),
        Family::Gaussian,
    )
    .unwrap();
    let grid = HyperGrid {
        sigma: HyperSetting::Estimate,
        sa: HyperSetting::Estimate,
        logodds: LogOddsGrid::Shared(vec![-1.5, -1.0, -0.5]),
    };
    let direct = fit(&ds, &grid, &FitOptions::default()).unwrap();
    assert_eq!(pip, direct.pip);
    assert_eq!(beta, direct.beta_mean);
    assert_eq!(w, direct.w);
    assert_eq!(logw, direct.fits.logw);
    assert!(pip[0] > 0.9, "the planted effect should be found: {pip:?}");

    unsafe { vs_model_free(model) };
}

#[test]
fn buffer_sizes_are_checked() {
    let model = fit_handle(false);
    let mut small = vec![0.0; 2];
    let status = unsafe { vs_model_pip(model, small.as_mut_ptr(), 2) };
    assert_eq!(status, VsStatus::Usage);
    assert!(last_error().contains("pip"), "{}", last_error());
    let status = unsafe { vs_model_pip(model, ptr::null_mut(), 4) };
    assert_eq!(status, VsStatus::NullArgument);
    unsafe { vs_model_free(model) };
}

#[test]
fn invalid_arguments_come_back_as_statuses() {
    let (x, y) = toy_data(10, 2, false);
    let logodds = [-1.0];
    let mut model: *mut VsModel = ptr::null_mut();

    let status = unsafe {
        vs_fit(
            ptr::null(), 10, 2, y.as_ptr(), ptr::null(), 0, 0,
            logodds.as_ptr(), 1, ptr::null(), ptr::null(), ptr::null(), &mut model,
        )
    };
    assert_eq!(status, VsStatus::NullArgument);

    let status = unsafe {
        vs_fit(
            x.as_ptr(), 10, 2, y.as_ptr(), ptr::null(), 0, 7,
            logodds.as_ptr(), 1, ptr::null(), ptr::null(), ptr::null(), &mut model,
        )
    };
    assert_eq!(status, VsStatus::Usage);
    assert!(last_error().contains("family"), "{}", last_error());

    // A gaussian outcome is invalid under the binomial family.
    let status = unsafe {
        vs_fit(
            x.as_ptr(), 10, 2, y.as_ptr(), ptr::null(), 0, 1,
            logodds.as_ptr(), 1, ptr::null(), ptr::null(), ptr::null(), &mut model,
        )
    };
    assert_eq!(status, VsStatus::Data);
    assert!(model.is_null());
}

#[test]
fn archives_round_trip_through_the_handle_api() {
    let dir = tempdir().unwrap();
    let path = CString::new(
        dir.path().join("toy.vsel").to_str().unwrap(),
    )
    .unwrap();

    let model = fit_handle(false);
    assert_eq!(unsafe { vs_save(model, path.as_ptr()) }, VsStatus::Ok);

    let mut loaded: *mut VsModel = ptr::null_mut();
    assert_eq!(unsafe { vs_load(path.as_ptr(), &mut loaded) }, VsStatus::Ok);

    let mut before = vec![0.0; 4];
    let mut after = vec![0.0; 4];
    unsafe {
        assert_eq!(vs_model_pip(model, before.as_mut_ptr(), 4), VsStatus::Ok);
        assert_eq!(vs_model_pip(loaded, after.as_mut_ptr(), 4), VsStatus::Ok);
    }
    assert_eq!(
        before.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        after.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );

    let missing = CString::new(dir.path().join("absent.vsel").to_str().unwrap()).unwrap();
    let mut nothing: *mut VsModel = ptr::null_mut();
    assert_eq!(unsafe { vs_load(missing.as_ptr(), &mut nothing) }, VsStatus::Io);

    unsafe {
        vs_model_free(model);
        vs_model_free(loaded);
        vs_model_free(ptr::null_mut());
    }
}

#[test]
fn predictions_agree_with_the_library() {
    let model = fit_handle(false);
    let (x, _) = toy_data(40, 4, false);
    let mut got = vec![0.0; 40];
    let status = unsafe {
        vs_predict(model, x.as_ptr(), 40, 4, ptr::null(), 0, got.as_mut_ptr(), 40)
    };
    assert_eq!(status, VsStatus::Ok, "{}", last_error());

    let direct = {
        let m = unsafe { &*(model as *const VsModel) };
        let _ = m; // the handle stays opaque; recompute through the library
        let (x_all, y) = toy_data(40, 4, false);
        let ds = Dataset::new(
            DMatrix::from_row_slice(40, 4, &x_all),
            None,
            DVector::from_column_slice(&y),
            Family::Gaussian,
        )
        .unwrap();
        let grid = HyperGrid {
            sigma: HyperSetting::Estimate,
            sa: HyperSetting::Estimate,
            logodds: LogOddsGrid::Shared(vec![-1.5, -1.0, -0.5]),
        };
        let refit = fit(&ds, &grid, &FitOptions::default()).unwrap();
        varsel::predict::predict_linear(&refit, &DMatrix::from_row_slice(40, 4, &x), None).unwrap()
    };
    assert_eq!(got, direct);

    // Mismatched extents are rejected before any arithmetic.
    let status = unsafe {
        vs_predict(model, x.as_ptr(), 40, 4, ptr::null(), 0, got.as_mut_ptr(), 39)
    };
    assert_eq!(status, VsStatus::Usage);

    unsafe { vs_model_free(model) };
}

#[test]
fn binomial_predictions_are_probabilities() {
    let model = fit_handle(true);
    assert_eq!(unsafe { vs_model_family(model) }, 1);
    let (x, _) = toy_data(40, 4, true);
    let mut probs = vec![-1.0; 40];
    let status = unsafe {
        vs_predict(model, x.as_ptr(), 40, 4, ptr::null(), 0, probs.as_mut_ptr(), 40)
    };
    assert_eq!(status, VsStatus::Ok, "{}", last_error());
    assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
    unsafe { vs_model_free(model) };
}

#[test]
fn bayes_factor_of_a_model_with_itself_is_one() {
    let model = fit_handle(false);
    let mut bf = 0.0;
    assert_eq!(unsafe { vs_bayes_factor(model, model, &mut bf) }, VsStatus::Ok);
    assert_eq!(bf, 1.0);
    unsafe { vs_model_free(model) };
}

#[test]
fn version_is_a_static_string() {
    let v = unsafe { CStr::from_ptr(vs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_is_valid_c() {
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let dir = tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(
        &src,
        r#"
#include "varsel.h"

int check(const double *x, const double *y) {
    VsFitOptions opts;
    if (vs_fit_options_default(&opts) != VS_STATUS_OK) return 1;
    VsModel *model = 0;
    double logodds[1] = {-1.0};
    VsStatus s = vs_fit(x, 10, 2, y, 0, 0, 0, logodds, 1, 0, 0, &opts, &model);
    if (s != VS_STATUS_OK) return 2;
    double pip[2];
    s = vs_model_pip(model, pip, vs_model_n_variables(model));
    vs_model_free(model);
    return s == VS_STATUS_OK ? 0 : 3;
}
"#,
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .output()
        .expect("a C compiler should be installed");
    assert!(
        out.status.success(),
        "header failed to compile:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
