use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use slide_opt_ffi::*;

fn last_error() -> String {
    let p = slide_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn gs_run_through_handles() {
    unsafe {
        let name = CString::new("quad_l1").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(slide_problem_desk(name.as_ptr(), &mut p), SlideStatus::Ok);
        let mut n = 0usize;
        assert_eq!(slide_problem_dim(p, &mut n), SlideStatus::Ok);
        assert_eq!(n, 50);

        let mut v = 0.0;
        assert_eq!(slide_problem_reference_value(p, &mut v), SlideStatus::NoReference);
        assert_eq!(slide_problem_attach_reference(p, 1e-10), SlideStatus::Ok);
        assert_eq!(slide_problem_reference_value(p, &mut v), SlideStatus::Ok);

        let mut run = ptr::null_mut();
        assert_eq!(slide_run_gs(p, 10, &mut run), SlideStatus::Ok);
        let mut c = SlideCounts::default();
        assert_eq!(slide_run_counts(run, &mut c), SlideStatus::Ok);
        assert_eq!(c.grad_calls, 10);
        assert!(c.subgrad_calls >= 10);

        let mut short = vec![0.0; 3];
        assert_eq!(slide_run_output(run, short.as_mut_ptr(), 3), SlideStatus::BufferTooSmall);
        assert!(last_error().contains("50"));
        let mut x = vec![0.0; n];
        assert_eq!(slide_run_output(run, x.as_mut_ptr(), n), SlideStatus::Ok);
        let mut obj = 0.0;
        assert_eq!(slide_problem_objective(p, x.as_ptr(), n, &mut obj), SlideStatus::Ok);
        let mut gap = 0.0;
        assert_eq!(slide_run_final_gap(run, &mut gap), SlideStatus::Ok);
        assert!((obj - v - gap).abs() < 1e-12);
        assert!(gap >= -1e-10);

        slide_run_free(run);
        slide_problem_free(p);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let bad = CString::new("nope").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(slide_problem_desk(bad.as_ptr(), &mut p), SlideStatus::InvalidConfig);
        assert!(p.is_null());
        assert!(last_error().contains("nope"));
        assert_eq!(slide_problem_desk(ptr::null(), &mut p), SlideStatus::NullPointer);

        let toml = CString::new("family = \"strong_quad_l1\"\nmu = 1.0\nsigma = 0.5\nn = 5\nm = 6").unwrap();
        assert_eq!(slide_problem_from_toml(toml.as_ptr(), &mut p), SlideStatus::Ok);
        let mut run = ptr::null_mut();
        // unbounded X has no default D̃
        assert_eq!(slide_run_gs(p, 5, &mut run), SlideStatus::Unsupported);
        assert!(run.is_null());
        let mut obj = 0.0;
        let x = [0.0; 4];
        assert_eq!(slide_problem_objective(p, x.as_ptr(), 4, &mut obj), SlideStatus::InvalidArgument);
        slide_problem_free(p);
        slide_problem_free(ptr::null_mut());
        slide_run_free(ptr::null_mut());
    }
}

#[test]
fn sgs_is_reproducible_by_seed() {
    unsafe {
        let name = CString::new("stoch_abs").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(slide_problem_desk(name.as_ptr(), &mut p), SlideStatus::Ok);
        let out = |seed| {
            let mut run = ptr::null_mut();
            assert_eq!(slide_run_sgs(p, 8, seed, &mut run), SlideStatus::Ok);
            let mut x = vec![0.0; 50];
            assert_eq!(slide_run_output(run, x.as_mut_ptr(), 50), SlideStatus::Ok);
            slide_run_free(run);
            x
        };
        assert_eq!(out(3), out(3));
        assert_ne!(out(3), out(4));
        slide_problem_free(p);
    }
}

#[test]
fn experiment_returns_json() {
    unsafe {
        let cfg = CString::new("preset = \"quad_l1\"\n[algorithm]\nname = \"gs\"\nhorizons = [5]\n").unwrap();
        let mut json = ptr::null_mut();
        assert_eq!(slide_experiment_run(cfg.as_ptr(), &mut json), SlideStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        slide_string_free(json);
        assert!(text.contains("\"aggregates\""));
        assert!(text.contains("\"lipschitz\""));

        let bad = CString::new("preset = \"quad_l1\"\n[algorithm]\nname = \"gs\"\nhorizons = [-5]\n").unwrap();
        let mut json = ptr::null_mut();
        assert_eq!(slide_experiment_run(bad.as_ptr(), &mut json), SlideStatus::InvalidConfig);
        assert!(last_error().contains("`N`"));
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/slide_opt.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["slide_problem_desk", "slide_run_gs", "slide_last_error", "slide_string_free"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).output() else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
