use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use alu_ffi::*;

const SPEC: &str = r#"{"d":3,"n_pub":30,"n_priv":40,"n_forget":8,"shift":0.2,"seed":5}"#;

fn params() -> AluTrainParams {
    AluTrainParams {
        lambda: 0.05,
        clip: 1.0,
        eta: 1.0,
        sigma: 0.1,
        t: 5,
        k: 2,
        radius: 5.0,
        alpha: 2.0,
    }
}

fn last_error() -> String {
    let p = alu_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn dataset() -> *mut AluDataset {
    let spec = CString::new(SPEC).unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(
        unsafe { alu_dataset_synthetic(spec.as_ptr(), &mut ds) },
        AluStatus::Ok
    );
    ds
}

fn sample(ds: *const AluDataset, p: AluPipeline, n: usize, seed: u64) -> *mut AluSampleSet {
    let mut set = ptr::null_mut();
    assert_eq!(
        unsafe { alu_sample(ds, p, n, &params(), seed, &mut set) },
        AluStatus::Ok
    );
    set
}

#[test]
fn dataset_counts_match_spec() {
    let ds = dataset();
    let (mut a, mut b, mut c, mut d) = (0, 0, 0, 0);
    assert_eq!(
        unsafe { alu_dataset_counts(ds, &mut a, &mut b, &mut c, &mut d) },
        AluStatus::Ok
    );
    assert_eq!((a, b, c, d), (30, 40, 8, 3));
    unsafe { alu_dataset_free(ds) };
}

#[test]
fn samples_round_trip_through_files() {
    let ds = dataset();
    let set = sample(ds, AluPipeline::Unlearn, 3, 11);
    let dir = tempfile::tempdir().unwrap();
    let file = CString::new(dir.path().join("u.csv").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { alu_samples_write(set, file.as_ptr()) },
        AluStatus::Ok
    );
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { alu_samples_read(file.as_ptr(), &mut back) },
        AluStatus::Ok
    );

    let (mut len, mut dim) = (0, 0);
    assert_eq!(
        unsafe { alu_samples_shape(back, &mut len, &mut dim) },
        AluStatus::Ok
    );
    assert_eq!((len, dim), (3, 3));
    for i in 0..len {
        let (mut x, mut y) = ([0.0; 3], [0.0; 3]);
        assert_eq!(
            unsafe { alu_samples_weights(set, i, x.as_mut_ptr(), 3) },
            AluStatus::Ok
        );
        assert_eq!(
            unsafe { alu_samples_weights(back, i, y.as_mut_ptr(), 3) },
            AluStatus::Ok
        );
        assert_eq!(x, y);
    }
    let mut small = [0.0; 2];
    assert_eq!(
        unsafe { alu_samples_weights(set, 0, small.as_mut_ptr(), 2) },
        AluStatus::InvalidArgument
    );
    assert!(last_error().contains("buffer"));
    unsafe {
        alu_samples_free(set);
        alu_samples_free(back);
        alu_dataset_free(ds);
    }
}

#[test]
fn bounds_match_core() {
    let p = params();
    let mut v = 0.0;
    assert_eq!(
        unsafe { alu_bound_learn_retrain(&p, 0, 100, 10, &mut v) },
        AluStatus::Ok
    );
    let expected = 4.0 * 2.0 * 0.01 * (-(-0.05f64 * 5.0).exp_m1()) / (0.05 * 0.01);
    assert!((v - expected).abs() <= 1e-12 * expected);

    let mut u = 0.0;
    assert_eq!(
        unsafe { alu_bound_unlearn(&p, v, 1.0, &mut u) },
        AluStatus::Ok
    );
    assert!((u - v * (-2.0f64 * 2.0 * 0.01 / 2.0).exp()).abs() <= 1e-12 * v);

    let (mut sym, mut asym) = (0.0, 0.0);
    assert_eq!(
        unsafe { alu_required_sigma(&p, 300, 100, 10, 1.0, false, &mut sym) },
        AluStatus::Ok
    );
    assert_eq!(
        unsafe { alu_required_sigma(&p, 300, 100, 10, 1.0, true, &mut asym) },
        AluStatus::Ok
    );
    assert!((asym - sym * 0.25).abs() <= 1e-12 * sym);

    let mut g = 0.0;
    assert_eq!(
        unsafe { alu_generalization_bound(0.0, 10, 10, 0.3, 1.0, 2.0, 0.0, &mut g) },
        AluStatus::Ok
    );
    assert_eq!(g, 0.3);
}

#[test]
fn errors_set_status_and_message() {
    let mut v = 0.0;
    assert_eq!(
        unsafe { alu_bound_learn_retrain(ptr::null(), 0, 1, 0, &mut v) },
        AluStatus::NullPointer
    );
    assert!(last_error().contains("params"));

    let mut bad = params();
    bad.lambda = -1.0;
    assert_eq!(
        unsafe { alu_bound_learn_retrain(&bad, 0, 1, 0, &mut v) },
        AluStatus::Domain
    );

    let spec = CString::new("{\"d\": 3}").unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(
        unsafe { alu_dataset_synthetic(spec.as_ptr(), &mut ds) },
        AluStatus::InvalidArgument
    );
    assert!(ds.is_null());

    let missing = CString::new("/nonexistent/x.csv").unwrap();
    let mut set = ptr::null_mut();
    assert_eq!(
        unsafe { alu_samples_read(missing.as_ptr(), &mut set) },
        AluStatus::Io
    );

    unsafe {
        alu_dataset_free(ptr::null_mut());
        alu_samples_free(ptr::null_mut());
    }
}

#[test]
fn estimate_and_attack_run() {
    let ds = dataset();
    let (p, q) = (
        sample(ds, AluPipeline::Retrain, 40, 0),
        sample(ds, AluPipeline::Retrain, 40, 1000),
    );
    let mut d = f64::NAN;
    assert_eq!(
        unsafe { alu_estimate_renyi(p, q, 2.0, AluObjective::DonskerVaradhan, 5, 2, &mut d) },
        AluStatus::Ok
    );
    assert!(d.is_finite() && d >= 0.0);

    let su = sample(ds, AluPipeline::Unlearn, 10, 10_000);
    let sr = sample(ds, AluPipeline::Retrain, 10, 20_000);
    let tu = sample(ds, AluPipeline::Unlearn, 5, 30_000);
    let tr = sample(ds, AluPipeline::Retrain, 5, 40_000);
    let (mut acc, mut med) = (f64::NAN, f64::NAN);
    assert_eq!(
        unsafe { alu_attack(ds, 0, su, sr, tu, tr, &mut acc, &mut med) },
        AluStatus::Ok
    );
    assert!((0.0..=1.0).contains(&acc) && (0.0..=1.0).contains(&med));
    assert_eq!(
        unsafe { alu_attack(ds, 99, su, sr, tu, tr, &mut acc, &mut med) },
        AluStatus::InvalidArgument
    );
    for s in [p, q, su, sr, tu, tr] {
        unsafe { alu_samples_free(s) };
    }
    unsafe { alu_dataset_free(ds) };
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(alu_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn c_program_links_and_calls_the_library() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"alu.h\"\n\
         int main(void) {\n\
           AluTrainParams p = {0.05, 1.0, 1.0, 0.1, 5, 2, 5.0, 2.0};\n\
           double v;\n\
           AluStatus s = alu_bound_learn_retrain(&p, 0, 100, 10, &v);\n\
           return s == ALU_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    // the test binary lives in <target>/<profile>/deps
    let lib = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .join("libalu_ffi.a");
    let mut cmd = Command::new(cc);
    cmd.args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src);
    if !lib.exists() {
        assert!(cmd.arg("-fsyntax-only").status().unwrap().success());
        return;
    }
    let exe = dir.path().join("use");
    let built = cmd
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(built.success());
    assert!(Command::new(&exe).status().unwrap().success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
