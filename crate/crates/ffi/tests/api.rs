use std::ffi::{CStr, CString};
use std::ptr;

use linforest_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(lf_last_error()) }.to_string_lossy().into_owned()
}

fn matrix(n: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = (0..d).map(|j| ((i * 37 + j * 11) % 101) as f64 / 101.0).collect();
        y.push(if row[0] > 0.5 { 3.0 * row[1] } else { -2.0 + row[2] });
        x.extend(row);
    }
    (x, y)
}

fn small_params() -> LfParams {
    let mut p = unsafe {
        let mut p = std::mem::zeroed();
        assert_eq!(lf_params_default(&mut p), LfStatus::Ok);
        p
    };
    p.ntree = 4;
    p.seed = 11;
    p.threads = 2;
    p
}

#[test]
fn defaults_match_library() {
    let p = small_params();
    assert_eq!(p.mtry, 0);
    assert_eq!(p.lambda, 1.0);
    assert_eq!(p.folds, 5);
    assert!(!p.honest);
    let v = unsafe { CStr::from_ptr(lf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn train_predict_save_load() {
    let (n, d) = (200, 4);
    let (x, y) = matrix(n, d);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(lf_dataset_from_matrix(x.as_ptr(), n, d, y.as_ptr(), &mut ds), LfStatus::Ok);
        let mut rows = 0;
        assert_eq!(lf_dataset_n_rows(ds, &mut rows), LfStatus::Ok);
        assert_eq!(rows, n);

        let mut forest = ptr::null_mut();
        assert_eq!(lf_forest_train(ds, &small_params(), &mut forest), LfStatus::Ok, "{}", last_error());
        let mut k = 0;
        assert_eq!(lf_forest_n_trees(forest, &mut k), LfStatus::Ok);
        assert_eq!(k, 4);
        assert_eq!(lf_forest_n_features(forest, &mut k), LfStatus::Ok);
        assert_eq!(k, d);

        let mut a = vec![0.0; n];
        assert_eq!(lf_forest_predict(forest, ds, a.as_mut_ptr(), n), LfStatus::Ok);
        let mut b = vec![0.0; n];
        assert_eq!(lf_forest_predict_rows(forest, x.as_ptr(), n, d, b.as_mut_ptr()), LfStatus::Ok);
        assert_eq!(a, b);

        assert_eq!(lf_forest_save(forest, path.as_ptr()), LfStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(lf_forest_load(path.as_ptr(), &mut loaded), LfStatus::Ok);
        let mut c = vec![0.0; n];
        assert_eq!(lf_forest_predict(loaded, ds, c.as_mut_ptr(), n), LfStatus::Ok);
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), c.iter().map(|v| v.to_bits()).collect::<Vec<_>>());

        let mut dot = ptr::null_mut();
        assert_eq!(lf_forest_export_dot(loaded, 0, &mut dot), LfStatus::Ok);
        assert!(CStr::from_ptr(dot).to_str().unwrap().starts_with("digraph tree {"));
        lf_string_free(dot);
        assert_eq!(lf_forest_export_dot(loaded, 4, &mut dot), LfStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        lf_forest_free(loaded);
        lf_forest_free(forest);
        lf_dataset_free(ds);
    }
}

#[test]
fn csv_with_categorical_column() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("d.csv");
    let mut text = String::from("x,g,y\n");
    for i in 0..60 {
        let g = ["a", "b", "c"][i % 3];
        text += &format!("{},{g},{}\n", i as f64 / 10.0, if g == "b" { 5.0 } else { i as f64 / 20.0 });
    }
    std::fs::write(&file, text).unwrap();
    let path = CString::new(file.to_str().unwrap()).unwrap();
    let target = CString::new("y").unwrap();
    let cats = CString::new("g").unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(lf_dataset_load_csv(path.as_ptr(), target.as_ptr(), cats.as_ptr(), &mut ds), LfStatus::Ok);
        let mut d = 0;
        assert_eq!(lf_dataset_n_features(ds, &mut d), LfStatus::Ok);
        assert_eq!(d, 2);
        let mut p = small_params();
        p.nodesize_spl = 4;
        let mut forest = ptr::null_mut();
        assert_eq!(lf_forest_train(ds, &p, &mut forest), LfStatus::Ok, "{}", last_error());
        // unseen level
        let row = [1.0, -1.0];
        let mut out = 0.0;
        assert_eq!(lf_forest_predict_rows(forest, row.as_ptr(), 1, 2, &mut out), LfStatus::Ok);
        assert!(out.is_finite());
        lf_forest_free(forest);
        lf_dataset_free(ds);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(lf_dataset_from_matrix(ptr::null(), 3, 2, ptr::null(), &mut ds), LfStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert!(ds.is_null());

        let missing = CString::new("/nonexistent/file.csv").unwrap();
        let y = CString::new("y").unwrap();
        assert_eq!(lf_dataset_load_csv(missing.as_ptr(), y.as_ptr(), ptr::null(), &mut ds), LfStatus::Io);
        assert!(!last_error().is_empty());

        let (x, yv) = matrix(40, 3);
        assert_eq!(lf_dataset_from_matrix(x.as_ptr(), 40, 3, yv.as_ptr(), &mut ds), LfStatus::Ok);
        assert_eq!(last_error(), "");
        let mut p = small_params();
        p.lambda = -1.0;
        let mut forest = ptr::null_mut();
        assert_eq!(lf_forest_train(ds, &p, &mut forest), LfStatus::Config);
        assert!(forest.is_null());

        p.lambda = 1.0;
        assert_eq!(lf_forest_train(ds, &p, &mut forest), LfStatus::Ok);
        let mut out = vec![0.0; 39];
        assert_eq!(lf_forest_predict(forest, ds, out.as_mut_ptr(), 39), LfStatus::InvalidArgument);
        assert_eq!(lf_forest_predict_rows(forest, x.as_ptr(), 1, 2, out.as_mut_ptr()), LfStatus::Schema);
        assert_eq!(lf_forest_n_trees(ptr::null(), ptr::null_mut()), LfStatus::NullPointer);

        let junk = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(junk.path(), "{\"format\": \"other\"}").unwrap();
        let junk_path = CString::new(junk.path().to_str().unwrap()).unwrap();
        let mut loaded = ptr::null_mut();
        assert_ne!(lf_forest_load(junk_path.as_ptr(), &mut loaded), LfStatus::Ok);
        assert!(loaded.is_null());

        lf_forest_free(forest);
        lf_dataset_free(ds);
        lf_dataset_free(ptr::null_mut());
        lf_string_free(ptr::null_mut());
    }
}
