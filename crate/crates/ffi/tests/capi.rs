use std::ffi::{CStr, CString};
use std::ptr;

use mtuc_ffi::*;

fn tiny() -> *mut MtucScenario {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mtuc_scenario_generate(3, 1, 2, 600.0, 4, &mut h) }, MtucStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    let p = mtuc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take(s: *mut std::ffi::c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { mtuc_string_free(s) };
    out
}

#[test]
fn generate_size_and_free() {
    let h = tiny();
    let (mut k, mut m, mut n) = (0, 0, 0);
    assert_eq!(unsafe { mtuc_scenario_size(h, &mut k, &mut m, &mut n) }, MtucStatus::Ok);
    assert_eq!((k, m, n), (3, 1, 6));
    assert_eq!(unsafe { mtuc_scenario_size(h, ptr::null_mut(), ptr::null_mut(), &mut n) }, MtucStatus::Ok);
    unsafe { mtuc_scenario_free(h) };
    unsafe { mtuc_scenario_free(ptr::null_mut()) };
}

#[test]
fn toml_round_trip_keeps_the_hash() {
    let h = tiny();
    let mut text = ptr::null_mut();
    let mut hash = ptr::null_mut();
    assert_eq!(unsafe { mtuc_scenario_to_toml(h, &mut text) }, MtucStatus::Ok);
    assert_eq!(unsafe { mtuc_scenario_hash(h, &mut hash) }, MtucStatus::Ok);
    let text = CString::new(take(text)).unwrap();
    let hash = take(hash);

    let mut g = ptr::null_mut();
    assert_eq!(unsafe { mtuc_scenario_from_toml(text.as_ptr(), &mut g) }, MtucStatus::Ok);
    let mut hash2 = ptr::null_mut();
    assert_eq!(unsafe { mtuc_scenario_hash(g, &mut hash2) }, MtucStatus::Ok);
    assert_eq!(take(hash2), hash);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(&path, text.to_bytes()).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut l = ptr::null_mut();
    assert_eq!(unsafe { mtuc_scenario_load(cpath.as_ptr(), &mut l) }, MtucStatus::Ok);
    unsafe {
        mtuc_scenario_free(h);
        mtuc_scenario_free(g);
        mtuc_scenario_free(l);
    }
}

#[test]
fn scheme_profit_matches_the_core_library() {
    let h = tiny();
    let full = CString::new("full").unwrap();
    let none = CString::new("none").unwrap();
    let aware = CString::new("aware").unwrap();
    let mut b = MtucBreakdown::default();
    assert_eq!(unsafe { mtuc_scheme_profit(h, full.as_ptr(), ptr::null(), aware.as_ptr(), 0, &mut b) }, MtucStatus::Ok);
    assert!(b.profit.is_finite());
    assert!((b.revenue - b.task_cost - b.movement_cost - b.fairness_penalty - b.profit).abs() <= 1e-9 * b.revenue.abs().max(1.0));

    let s = mtuc_core::generate_random(
        &{
            let mut g = mtuc_core::scenario::GenSpec::new(3, 1, mtuc_core::scenario::DeviceCount::PerGroup(2));
            g.area_m = 600.0;
            g
        },
        4,
    )
    .unwrap();
    let model = mtuc_core::economics::SystemModel::new(&s).unwrap();
    let spec = mtuc_core::baselines::SchemeSpec::new(mtuc_core::baselines::OffloadMode::Full, mtuc_core::baselines::CacheMode::FullCapped)
        .with_routing(mtuc_core::baselines::RoutingMode::EnvAware);
    assert_eq!(mtuc_core::baselines::run_scheme(&model, &spec, 0).unwrap().breakdown.profit, b.profit);

    let mut local = MtucBreakdown::default();
    assert_eq!(unsafe { mtuc_scheme_profit(h, none.as_ptr(), none.as_ptr(), ptr::null(), 0, &mut local) }, MtucStatus::Ok);
    assert_eq!(local.revenue, 0.0);
    unsafe { mtuc_scenario_free(h) };
}

#[test]
fn oracle_bounds_every_scheme() {
    let h = tiny();
    let (mut best, mut nodes) = (0.0, 0u64);
    assert_eq!(unsafe { mtuc_oracle_profit(h, 0.5, &mut best, &mut nodes) }, MtucStatus::Ok);
    assert!(nodes > 0);
    for mode in ["full", "none", "partial:0.5"] {
        let m = CString::new(mode).unwrap();
        let mut b = MtucBreakdown::default();
        assert_eq!(unsafe { mtuc_scheme_profit(h, m.as_ptr(), ptr::null(), ptr::null(), 1, &mut b) }, MtucStatus::Ok);
        assert!(b.profit <= best + 1e-6 * best.abs(), "{mode}: {} > {best}", b.profit);
    }
    assert_eq!(unsafe { mtuc_oracle_profit(h, 0.3, &mut best, ptr::null_mut()) }, MtucStatus::Domain);
    unsafe { mtuc_scenario_free(h) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mtuc_scenario_generate(0, 1, 1, 0.0, 0, &mut h) }, MtucStatus::InvalidScenario);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { mtuc_scenario_generate(2, 1, 1, 0.0, 0, ptr::null_mut()) }, MtucStatus::NullPointer);
    assert!(last_error().contains("null"));

    let junk = CString::new("not = [toml").unwrap();
    assert_eq!(unsafe { mtuc_scenario_from_toml(junk.as_ptr(), &mut h) }, MtucStatus::InvalidScenario);

    let missing = CString::new("/nonexistent/scenario.toml").unwrap();
    assert_eq!(unsafe { mtuc_scenario_load(missing.as_ptr(), &mut h) }, MtucStatus::Io);

    let t = tiny();
    let bogus = CString::new("sometimes").unwrap();
    let mut b = MtucBreakdown::default();
    assert_eq!(unsafe { mtuc_scheme_profit(t, bogus.as_ptr(), ptr::null(), ptr::null(), 0, &mut b) }, MtucStatus::InvalidArgument);
    assert!(last_error().contains("sometimes"));
    assert_eq!(unsafe { mtuc_scheme_profit(ptr::null(), bogus.as_ptr(), ptr::null(), ptr::null(), 0, &mut b) }, MtucStatus::NullPointer);

    let mut big = ptr::null_mut();
    assert_eq!(unsafe { mtuc_scenario_generate(7, 1, 1, 0.0, 0, &mut big) }, MtucStatus::Ok);
    let mut p = 0.0;
    assert_eq!(unsafe { mtuc_oracle_profit(big, 0.5, &mut p, ptr::null_mut()) }, MtucStatus::TooLarge);
    unsafe {
        mtuc_scenario_free(t);
        mtuc_scenario_free(big);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/mtuc.h");
    for name in [
        "mtuc_last_error_message",
        "mtuc_version",
        "mtuc_scenario_generate",
        "mtuc_scenario_from_toml",
        "mtuc_scenario_load",
        "mtuc_scenario_free",
        "mtuc_scenario_size",
        "mtuc_scenario_to_toml",
        "mtuc_scenario_hash",
        "mtuc_string_free",
        "mtuc_scheme_profit",
        "mtuc_oracle_profit",
        "MTUC_STATUS_PANIC",
        "typedef struct MtucScenario MtucScenario",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let v = unsafe { CStr::from_ptr(mtuc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
