use std::ffi::{c_char, CString};
use std::ptr;

use pomdp_voi_ffi::*;

const ONE_STATE: &str = "discount = 0.95\nstates = 1\nmaintenance_actions = [\"do-nothing\"]\n[transition]\ndo-nothing = [[1.0]]\n[rewards]\ndamage = [-1.0]\n";

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { pv_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take(n.min(255)).map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn solve_one_state_model() {
    let text = CString::new(ONE_STATE).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { pv_model_parse(text.as_ptr(), &mut model) }, PvStatus::Ok);
    assert_eq!(unsafe { pv_model_n_states(model) }, 1);
    let opts = pv_solver_options_default();
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { pv_solve(model, &opts, ptr::null(), 0, &mut sol) }, PvStatus::Ok);
    assert!(unsafe { pv_solution_converged(sol) });
    assert!((unsafe { pv_solution_lower(sol) } + 20.0).abs() < 1e-6);
    let b = [1.0];
    let (mut v, mut am, mut ao) = (0.0, 9usize, 9usize);
    assert_eq!(unsafe { pv_solution_query(sol, b.as_ptr(), 1, &mut v, &mut am, &mut ao) }, PvStatus::Ok);
    assert!((v + 20.0).abs() < 1e-6);
    assert_eq!((am, ao), (0, 0));
    let mut est = PvEstimate::default();
    assert_eq!(unsafe { pv_metric(model, PvMetric::Voi, 0, &opts, &mut est) }, PvStatus::Ok);
    assert!(est.value.abs() <= 2.0 * est.uncertainty + 1e-9);
    unsafe {
        pv_solution_free(sol);
        pv_model_free(model);
    }
}

#[test]
fn errors_are_reported() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { pv_model_parse(ptr::null(), &mut model) }, PvStatus::NullPointer);
    assert!(last_error().contains("null"));
    let bad = CString::new("discount = 1.5\nstates = 1\nmaintenance_actions = [\"a\"]\n[transition]\na = [[1.0]]\n").unwrap();
    assert_eq!(unsafe { pv_model_parse(bad.as_ptr(), &mut model) }, PvStatus::InvalidModel);
    assert!(last_error().contains("discount"));
    let garbled = CString::new("discount = = 1").unwrap();
    assert_eq!(unsafe { pv_model_parse(garbled.as_ptr(), &mut model) }, PvStatus::Parse);
    assert!(model.is_null());
    assert_eq!(unsafe { pv_model_three_component(0.9, 7, &mut model) }, PvStatus::Config);
}

#[test]
fn trivial_perm_is_rejected() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { pv_model_three_component(0.9, 1, &mut model) }, PvStatus::Ok);
    assert_eq!(unsafe { pv_model_n_actions(model) }, 64);
    let mut perm = ptr::null_mut();
    assert_eq!(unsafe { pv_model_make_perm(model, 0, &mut perm) }, PvStatus::Contract);
    assert_eq!(unsafe { pv_model_make_perm(model, 7, &mut perm) }, PvStatus::Ok);
    assert_eq!(unsafe { pv_model_n_actions(perm) }, 8);
    unsafe {
        pv_model_free(perm);
        pv_model_free(model);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pomdp_voi.h")).unwrap();
    for name in ["pv_model_parse", "pv_solve", "pv_solution_query", "pv_metric", "pv_voshm", "pv_last_error", "PV_STATUS_OK"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-std=c99", "-Iinclude", "examples/solve.c"])
        .current_dir(dir)
        .status()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(status.success());
}
