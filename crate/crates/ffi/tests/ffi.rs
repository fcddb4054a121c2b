use std::ffi::{CStr, CString};
use std::ptr;

use appraisal::dataset::{ColumnMeta, FeatureTable};
use appraisal::linalg::Matrix;
use appraisal::rulefit::{rulefit_fit, RuleFitConfig};
use appraisal_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(appraisal_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn ols_matches_core() {
    // y = 1 + 2 x1 - x2 + small deterministic wiggle
    let n = 40;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let a = i as f64 / 4.0;
        let b = ((i * 7) % 11) as f64;
        x.extend([a, b]);
        y.push(1.0 + 2.0 * a - b + 0.01 * ((i % 3) as f64 - 1.0));
    }
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { appraisal_ols_fit(x.as_ptr(), n, 2, y.as_ptr(), &mut h) }, AppraisalStatus::Ok);

    let core = appraisal::linmodel::ols_fit(&Matrix::from_row_slice(n, 2, &x), &y, &["x1".into(), "x2".into()]).unwrap();
    let (mut b0, mut b, mut se) = (0.0, [0.0; 2], [0.0; 3]);
    let s = unsafe { appraisal_ols_coefficients(h, &mut b0, b.as_mut_ptr(), se.as_mut_ptr(), 2) };
    assert_eq!(s, AppraisalStatus::Ok);
    assert_eq!(b0, core.intercept);
    assert_eq!(b.to_vec(), core.coefficients);
    assert_eq!(se.to_vec(), core.std_errors);

    let mut stats = AppraisalOlsStats::default();
    assert_eq!(unsafe { appraisal_ols_stats(h, &mut stats) }, AppraisalStatus::Ok);
    assert_eq!(stats.n, n);
    assert_eq!(stats.r2_adj, core.r2_adj);
    assert_eq!(stats.durbin_watson, core.durbin_watson);

    let q = [2.0, 3.0];
    let mut out = [0.0];
    assert_eq!(unsafe { appraisal_ols_predict(h, q.as_ptr(), 1, 2, out.as_mut_ptr()) }, AppraisalStatus::Ok);
    assert_eq!(out[0], core.intercept + core.coefficients[0] * 2.0 + core.coefficients[1] * 3.0);

    let mut k = 0usize;
    assert_eq!(unsafe { appraisal_ols_n_features(h, &mut k) }, AppraisalStatus::Ok);
    assert_eq!(k, 2);
    unsafe { appraisal_ols_free(h) };
}

#[test]
fn errors_are_reported() {
    let mut h = ptr::null_mut();
    let y = [1.0, 2.0];
    let s = unsafe { appraisal_ols_fit(ptr::null(), 2, 1, y.as_ptr(), &mut h) };
    assert_eq!(s, AppraisalStatus::NullPointer);
    assert!(last_error().contains("null"), "{}", last_error());
    assert!(h.is_null());

    // collinear columns
    let x = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0];
    let y = [1.0, 2.0, 3.0, 5.0];
    let s = unsafe { appraisal_ols_fit(x.as_ptr(), 4, 2, y.as_ptr(), &mut h) };
    assert_eq!(s, AppraisalStatus::RankDeficient, "{}", last_error());

    let x = [0.0, 1.0, 2.0, 3.0];
    let y = [1.0, 3.0, 5.0, 7.1];
    assert_eq!(unsafe { appraisal_ols_fit(x.as_ptr(), 4, 1, y.as_ptr(), &mut h) }, AppraisalStatus::Ok);
    assert!(last_error().is_empty());
    let (mut b0, mut b) = (0.0, [0.0; 3]);
    let s = unsafe { appraisal_ols_coefficients(h, &mut b0, b.as_mut_ptr(), ptr::null_mut(), 3) };
    assert_eq!(s, AppraisalStatus::LengthMismatch);
    unsafe { appraisal_ols_free(h) };
    unsafe { appraisal_ols_free(ptr::null_mut()) };

    let bad = CString::new("{not json").unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { appraisal_rulefit_load_json(bad.as_ptr(), &mut r) }, AppraisalStatus::Parse);
}

#[test]
fn rulefit_card_round_trip() {
    let n = 300;
    let x1: Vec<f64> = (0..n).map(|i| (i % 30) as f64).collect();
    let x2: Vec<f64> = (0..n).map(|i| ((i * 13) % 17) as f64).collect();
    let y: Vec<f64> = (0..n).map(|i| 3.0 * x1[i] + if x2[i] > 8.0 { 20.0 } else { 0.0 }).collect();
    let m = Matrix::from_fn(n, 2, |i, j| if j == 0 { x1[i] } else { x2[i] });
    let table = FeatureTable::new(m.clone(), y, vec![ColumnMeta::continuous("x1"), ColumnMeta::continuous("x2")]).unwrap();
    let model = rulefit_fit(&table, &RuleFitConfig::default(), 3).unwrap();
    let json = CString::new(model.to_json().unwrap()).unwrap();

    let mut h = ptr::null_mut();
    assert_eq!(unsafe { appraisal_rulefit_load_json(json.as_ptr(), &mut h) }, AppraisalStatus::Ok);
    let mut k = 0;
    assert_eq!(unsafe { appraisal_rulefit_n_features(h, &mut k) }, AppraisalStatus::Ok);
    assert_eq!(k, 2);
    let name = unsafe { CStr::from_ptr(appraisal_rulefit_feature_name(h, 1)) };
    assert_eq!(name.to_str().unwrap(), "x2");
    assert!(unsafe { appraisal_rulefit_feature_name(h, 2) }.is_null());

    let mut b0 = 0.0;
    assert_eq!(unsafe { appraisal_rulefit_intercept(h, &mut b0) }, AppraisalStatus::Ok);
    assert_eq!(b0, model.intercept);

    let rows: Vec<f64> = (0..n).flat_map(|i| [x1[i], x2[i]]).collect();
    let mut out = vec![0.0; n];
    assert_eq!(unsafe { appraisal_rulefit_predict(h, rows.as_ptr(), n, 2, out.as_mut_ptr()) }, AppraisalStatus::Ok);
    let want = model.predict(&m, &model.features).unwrap();
    assert_eq!(out, want);

    let s = unsafe { appraisal_rulefit_predict(h, rows.as_ptr(), n, 1, out.as_mut_ptr()) };
    assert_eq!(s, AppraisalStatus::LengthMismatch);
    unsafe { appraisal_rulefit_free(h) };
}

#[test]
fn kriging_interpolates_training_points() {
    let xy = [0.0, 0.0, 100.0, 0.0, 0.0, 100.0, 100.0, 100.0, 50.0, 40.0];
    let v = [1.0, -0.5, 0.25, 2.0, 0.0];
    let mut h = ptr::null_mut();
    let s = unsafe { appraisal_kriging_new(xy.as_ptr(), v.as_ptr(), 5, 0.0, 1.0, 80.0, 0, &mut h) };
    assert_eq!(s, AppraisalStatus::Ok, "{}", last_error());
    let mut vals = [0.0; 5];
    let mut var = [f64::NAN; 5];
    let s = unsafe { appraisal_kriging_predict(h, xy.as_ptr(), 5, vals.as_mut_ptr(), var.as_mut_ptr()) };
    assert_eq!(s, AppraisalStatus::Ok);
    for i in 0..5 {
        assert!((vals[i] - v[i]).abs() < 1e-9, "{i}: {} vs {}", vals[i], v[i]);
        assert!(var[i].abs() < 1e-9);
    }
    let q = [30.0, 30.0];
    let mut one = [0.0];
    assert_eq!(unsafe { appraisal_kriging_predict(h, q.as_ptr(), 1, one.as_mut_ptr(), ptr::null_mut()) }, AppraisalStatus::Ok);
    assert!(one[0].is_finite());
    unsafe { appraisal_kriging_free(h) };

    let s = unsafe { appraisal_kriging_new(xy.as_ptr(), v.as_ptr(), 5, 0.0, 1.0, -1.0, 0, &mut h) };
    assert_eq!(s, AppraisalStatus::InvalidInput);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/appraisal.h");
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for ty in ["AppraisalOls", "AppraisalRuleFit", "AppraisalKriging", "AppraisalOlsStats", "APPRAISAL_STATUS_OK"] {
        assert!(header.contains(ty), "{ty}");
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(appraisal_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
