use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use dalembert_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn builtin(name: &str, params: Option<&str>) -> *mut DzModel {
    let mut m = ptr::null_mut();
    let params = params.map(c);
    let st = unsafe { dz_model_builtin(c(name).as_ptr(), params.as_ref().map_or(ptr::null(), |p| p.as_ptr()), &mut m) };
    assert_eq!(st, DzStatus::Ok);
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(dz_last_error()).to_string_lossy().into_owned() }
}

#[test]
fn kepler_accel_and_energy() {
    let m = builtin("kepler2d_cartesian", None);
    assert_eq!(unsafe { dz_model_dim(m) }, 2);
    let (q, qd) = ([2.0, 0.0], [0.0, 0.5]);
    let mut qdd = [0.0; 2];
    let mut h = 0.0;
    unsafe {
        assert_eq!(dz_eom_accel(m, q.as_ptr(), qd.as_ptr(), 0.0, qdd.as_mut_ptr()), DzStatus::Ok);
        assert_eq!(dz_energy(m, q.as_ptr(), qd.as_ptr(), 0.0, &mut h), DzStatus::Ok);
        dz_model_free(m);
    }
    assert!((qdd[0] + 0.25).abs() < 1e-15 && qdd[1].abs() < 1e-15);
    assert!((h - (0.125 - 0.5)).abs() < 1e-15);
}

#[test]
fn gamma_is_linear_in_displacement() {
    let m = builtin("pendulum", None);
    let (q, qd) = ([0.3], [0.7]);
    let mut g1 = 0.0;
    let mut g2 = 0.0;
    unsafe {
        dz_gamma(m, q.as_ptr(), [1.0].as_ptr(), qd.as_ptr(), [2.0].as_ptr(), 0.0, &mut g1);
        dz_gamma(m, q.as_ptr(), [3.0].as_ptr(), qd.as_ptr(), [6.0].as_ptr(), 0.0, &mut g2);
        dz_model_free(m);
    }
    // γ = q̇ ε̇ − sin(q) ε
    assert!((g1 - (0.7 * 2.0 - 0.3f64.sin())).abs() < 1e-15);
    assert!((g2 - 3.0 * g1).abs() < 1e-14);
}

#[test]
fn mck_of_sphere() {
    let m = builtin("sphere_geodesic", None);
    let (q, qd) = ([1.0, 0.2], [0.3, 0.4]);
    let (mut mm, mut cc, mut kk) = ([0.0; 4], [0.0; 4], [0.0; 4]);
    let st = unsafe { dz_mck(m, q.as_ptr(), qd.as_ptr(), 0.0, mm.as_mut_ptr(), cc.as_mut_ptr(), kk.as_mut_ptr()) };
    unsafe { dz_model_free(m) };
    assert_eq!(st, DzStatus::Ok);
    let s2 = 1f64.sin().powi(2);
    assert!((mm[0] - 1.0).abs() < 1e-15 && (mm[3] - s2).abs() < 1e-15 && mm[1] == 0.0);
    // C + Cᵀ = 2 dM/dt, with dM/dt = diag(0, sin 2θ · θ̇)
    let dm = 2f64.sin() * 0.3;
    assert!((cc[3] - dm).abs() < 1e-14 && (cc[1] + cc[2]).abs() < 1e-14);
}

#[test]
fn dsl_model_and_integration() {
    let mut m = ptr::null_mut();
    let st = unsafe { dz_model_from_dsl(c("0.5*qd1^2 - 0.5*k*q1^2").as_ptr(), 1, c(r#"{"k": 4}"#).as_ptr(), &mut m) };
    assert_eq!(st, DzStatus::Ok);
    let mut tr = ptr::null_mut();
    let cfg = c(r#"{"method":"dopri5","t_end":3.0,"output_interval":1.0}"#);
    let st = unsafe { dz_integrate(m, [1.0].as_ptr(), [0.0].as_ptr(), [0.0].as_ptr(), [1.0].as_ptr(), cfg.as_ptr(), &mut tr) };
    assert_eq!(st, DzStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { dz_trajectory_len(tr) }, 4);
    let (mut t, mut q, mut eps) = (0.0, [0.0], [0.0]);
    let st = unsafe { dz_trajectory_sample(tr, 3, &mut t, q.as_mut_ptr(), eps.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, DzStatus::Ok);
    assert_eq!(t, 3.0);
    assert!((q[0] - 6f64.cos()).abs() < 1e-8);
    assert!((eps[0] - 6f64.sin() / 2.0).abs() < 1e-8);
    assert_eq!(unsafe { dz_trajectory_sample(tr, 4, &mut t, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) }, DzStatus::InvalidArgument);
    unsafe {
        dz_trajectory_free(tr);
        dz_model_free(m);
    }
}

#[test]
fn error_codes() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(dz_model_builtin(c("nope").as_ptr(), ptr::null(), &mut m), DzStatus::InvalidArgument);
        assert!(last_error().contains("nope"));
        assert_eq!(dz_model_builtin(ptr::null(), ptr::null(), &mut m), DzStatus::NullPointer);
        assert_eq!(dz_model_from_dsl(c("0.5*qd1^2 +").as_ptr(), 1, ptr::null(), &mut m), DzStatus::InvalidArgument);
        assert_eq!(dz_model_from_dsl(c("q1*qd1").as_ptr(), 1, ptr::null(), &mut m), DzStatus::Ok);
        let mut qdd = [0.0];
        assert_eq!(dz_eom_accel(m, [1.0].as_ptr(), [1.0].as_ptr(), 0.0, qdd.as_mut_ptr()), DzStatus::Degenerate);
        assert_eq!(dz_eom_accel(m, ptr::null(), [1.0].as_ptr(), 0.0, qdd.as_mut_ptr()), DzStatus::NullPointer);
        dz_model_free(m);
        dz_model_free(ptr::null_mut());
        assert_eq!(dz_model_dim(ptr::null()), 0);
    }
}

#[test]
fn verify_and_scenario_reports() {
    let m = builtin("rotating_frame", None);
    let mut report = ptr::null_mut();
    let mut passed = 0;
    assert_eq!(unsafe { dz_verify(m, 100, 5, &mut report, &mut passed) }, DzStatus::Ok);
    assert_eq!(passed, 1);
    let json: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(report) }.to_str().unwrap()).unwrap();
    assert_eq!(json["report_version"], 1);
    unsafe {
        dz_string_free(report);
        dz_model_free(m);
    }
    let scenario = c(r#"{
        "system": {"builtin": "driven_particle"},
        "initial": {"q": [0.0], "qd": [1.0]},
        "integrator": {"method": "dopri5", "t_end": 5.0, "output_interval": 0.5},
        "monitors": [{"kind": "H", "threshold": 1e-8}]
    }"#);
    let mut code = -1;
    assert_eq!(unsafe { dz_run_scenario(scenario.as_ptr(), &mut report, &mut code) }, DzStatus::Ok);
    assert_eq!(code, 2);
    unsafe { dz_string_free(report) };
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/dalembert.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct DzModel DzModel;"));
}

#[test]
fn c_program_links_against_static_library() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let target = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = target.join("libdalembert_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
}
