use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use jlcm_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(jlcm_last_error()) }.to_str().unwrap().to_string()
}

fn quick_config() -> *mut JlcmConfig {
    let cfg = jlcm_config_new();
    for (k, v) in [("iterations", "300"), ("burn_in", "100"), ("seed", "4")] {
        assert_eq!(unsafe { jlcm_config_set(cfg, c(k).as_ptr(), c(v).as_ptr()) }, JlcmStatus::Ok);
    }
    cfg
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(jlcm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn bad_config_reports_code_and_message() {
    let cfg = jlcm_config_new();
    let st = unsafe { jlcm_config_set(cfg, c("iterations").as_ptr(), c("many").as_ptr()) };
    assert_eq!(st, JlcmStatus::Parse);
    assert!(last_error().contains("iterations"));
    let st = unsafe { jlcm_config_set(cfg, c("no_such_key").as_ptr(), c("1").as_ptr()) };
    assert_ne!(st, JlcmStatus::Ok);
    assert!(!last_error().is_empty());
    unsafe { jlcm_config_free(cfg) };

    let mut parsed = ptr::null_mut();
    assert_eq!(unsafe { jlcm_config_parse(c("k = 3\nmembership = static\n").as_ptr(), &mut parsed) }, JlcmStatus::Ok);
    assert!(last_error().is_empty());
    unsafe { jlcm_config_free(parsed) };
}

#[test]
fn null_pointers_are_rejected() {
    let mut data = ptr::null_mut();
    assert_eq!(unsafe { jlcm_dataset_load(ptr::null(), c("x.csv").as_ptr(), &mut data) }, JlcmStatus::NullPointer);
    assert!(data.is_null());
    assert_eq!(unsafe { jlcm_dataset_simulate(10, 1, ptr::null_mut()) }, JlcmStatus::NullPointer);
    assert_eq!(unsafe { jlcm_dataset_n_subjects(ptr::null()) }, 0);
    unsafe {
        jlcm_dataset_free(ptr::null_mut());
        jlcm_chain_free(ptr::null_mut());
        jlcm_config_free(ptr::null_mut());
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let cfg = jlcm_config_new();
    let mut data = ptr::null_mut();
    let st = unsafe { jlcm_dataset_load(cfg, c("/nonexistent/data.csv").as_ptr(), &mut data) };
    assert_eq!(st, JlcmStatus::Io);
    unsafe { jlcm_config_free(cfg) };
}

#[test]
fn simulate_fit_and_query() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let mut data = ptr::null_mut();
    let mut chain = ptr::null_mut();
    unsafe {
        assert_eq!(jlcm_dataset_simulate(30, 2, &mut data), JlcmStatus::Ok);
        assert_eq!(jlcm_dataset_n_subjects(data), 30);
        assert!(jlcm_dataset_n_rows(data) >= 30 * 6);
        assert_eq!(jlcm_fit(data, cfg, &mut chain), JlcmStatus::Ok, "{}", last_error());
        assert_eq!(jlcm_chain_n_draws(chain), 300);

        let mut s = JlcmParamSummary::default();
        assert_eq!(jlcm_chain_summary(chain, c("beta_1_1").as_ptr(), &mut s), JlcmStatus::Ok);
        assert!(s.lower <= s.mean && s.mean <= s.upper && s.sd > 0.0);
        assert_eq!(jlcm_chain_summary(chain, c("beta_9_9").as_ptr(), &mut s), JlcmStatus::OutOfRange);

        let mut d = JlcmDic::default();
        assert_eq!(jlcm_dic(data, chain, cfg, &mut d), JlcmStatus::Ok);
        assert!(d.dic.is_finite() && (d.dic - d.mean_deviance - d.p_d).abs() < 1e-9 * d.dic.abs());

        let mut p = 0.0;
        assert_eq!(jlcm_predict(data, chain, 0, 0.5, 0.0, &mut p), JlcmStatus::Ok);
        assert_eq!(p, 1.0);
        assert_eq!(jlcm_predict(data, chain, 0, 0.5, 0.3, &mut p), JlcmStatus::Ok);
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(jlcm_predict(data, chain, 30, 0.5, 0.3, &mut p), JlcmStatus::OutOfRange);
        assert_eq!(jlcm_predict(data, chain, 0, -1.0, 0.3, &mut p), JlcmStatus::Domain);

        let mut auc = 0.0;
        let st = jlcm_auc(data, chain, 0.5, 0.3, &mut auc);
        assert!(st == JlcmStatus::Ok && (0.0..=1.0).contains(&auc) || st == JlcmStatus::UndefinedAuc);

        let path = c(dir.path().join("chain.txt").to_str().unwrap());
        assert_eq!(jlcm_chain_save(chain, cfg, path.as_ptr()), JlcmStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(jlcm_chain_load(path.as_ptr(), &mut loaded), JlcmStatus::Ok);
        assert_eq!(jlcm_chain_n_draws(loaded), 300);
        let mut s2 = JlcmParamSummary::default();
        jlcm_chain_summary(loaded, c("beta_1_1").as_ptr(), &mut s2);
        assert_eq!(jlcm_chain_summary(chain, c("beta_1_1").as_ptr(), &mut s), JlcmStatus::Ok);
        assert_eq!(s.mean.to_bits(), s2.mean.to_bits());

        jlcm_chain_free(loaded);
        jlcm_chain_free(chain);
        jlcm_dataset_free(data);
        jlcm_config_free(cfg);
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("jlcm.h").exists(), "build script did not write the header");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(
        &src,
        "#include \"jlcm.h\"\nint main(void) {\n  JlcmDataset *d = NULL;\n  JlcmStatus s = jlcm_dataset_simulate(5, 1, &d);\n  \
         return s == JLCM_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    for (compiler, extra) in [("cc", vec!["-std=c99"]), ("c++", vec!["-x", "c++"])] {
        let status = Command::new(compiler)
            .args(&extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&include)
            .arg(&src)
            .status()
            .unwrap_or_else(|e| panic!("cannot run {compiler}: {e}"));
        assert!(status.success(), "{compiler} rejected the header");
    }
}
