use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ibrscp::dynamics::Role;
use ibrscp::scenario::{examples_dir, Scenario};
use ibrscp_ffi::*;

fn lone_evader_file(dir: &Path) -> PathBuf {
    let mut s = Scenario::from_path(&examples_dir().join("example1.toml")).unwrap();
    s.name = "lone".into();
    s.players.retain(|p| p.role == Role::Evader);
    let path = dir.join("lone.toml");
    std::fs::write(&path, s.to_toml().unwrap()).unwrap();
    path
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = ibrscp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn null_and_missing_inputs_report_codes() {
    unsafe {
        let mut s: *mut IbrScenario = ptr::null_mut();
        assert_eq!(ibrscp_scenario_load(ptr::null(), &mut s), IbrStatus::NullPointer);
        assert!(s.is_null());
        assert!(last_error().contains("path"));

        let missing = CString::new("/nonexistent/scenario.toml").unwrap();
        assert_eq!(ibrscp_scenario_load(missing.as_ptr(), &mut s), IbrStatus::Validation);
        assert!(s.is_null());

        let dir = tempfile::tempdir().unwrap();
        let mut run: *mut IbrRun = ptr::null_mut();
        assert_eq!(ibrscp_run_open(cstr(dir.path()).as_ptr(), &mut run), IbrStatus::Validation);
        assert!(last_error().contains("scenario.toml"));
        assert_eq!(ibrscp_report(ptr::null()), IbrStatus::NullPointer);

        let mut n = 0usize;
        assert_eq!(ibrscp_run_iterations(ptr::null(), &mut n), IbrStatus::NullPointer);
        ibrscp_scenario_free(ptr::null_mut());
        ibrscp_run_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(ibrscp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn scenario_round_trip_through_handles() {
    let path = cstr(&examples_dir().join("example4.toml"));
    unsafe {
        let mut s: *mut IbrScenario = ptr::null_mut();
        assert_eq!(ibrscp_scenario_load(path.as_ptr(), &mut s), IbrStatus::Ok);
        assert!(ibrscp_last_error().is_null());
        let mut n = 0usize;
        assert_eq!(ibrscp_scenario_pursuer_count(s, &mut n), IbrStatus::Ok);
        assert_eq!(n, 4);
        assert_eq!(ibrscp_scenario_set_iterations(s, 3, 0), IbrStatus::Ok);
        ibrscp_scenario_free(s);
    }
}

#[test]
fn solve_verify_report_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(&lone_evader_file(dir.path()));
    let out = cstr(&dir.path().join("run"));
    unsafe {
        let mut s: *mut IbrScenario = ptr::null_mut();
        assert_eq!(ibrscp_scenario_load(path.as_ptr(), &mut s), IbrStatus::Ok);
        assert_eq!(ibrscp_scenario_set_iterations(s, 1, 0), IbrStatus::Ok);
        let mut run: *mut IbrRun = ptr::null_mut();
        assert_eq!(ibrscp_solve(s, out.as_ptr(), &mut run), IbrStatus::Ok, "{}", last_error());
        ibrscp_scenario_free(s);

        let mut n = 0usize;
        assert_eq!(ibrscp_run_iterations(run, &mut n), IbrStatus::Ok);
        assert_eq!(n, 1);
        assert_eq!(ibrscp_run_recorded_count(run, &mut n), IbrStatus::Ok);
        assert_eq!(n, 1);
        let mut info = IbrRecordedInfo::default();
        assert_eq!(ibrscp_run_recorded_info(run, 0, &mut info), IbrStatus::Ok);
        assert!(info.final_time > 0.0);
        assert_eq!(ibrscp_run_recorded_info(run, 1, &mut info), IbrStatus::OutOfRange);

        let mut nodes = vec![IbrNode::default(); info.nodes];
        let mut written = 0usize;
        assert_eq!(
            ibrscp_run_recorded_nodes(run, 0, nodes.as_mut_ptr(), 3, &mut written),
            IbrStatus::Ok
        );
        assert_eq!(written, 3);
        assert_eq!(
            ibrscp_run_recorded_nodes(run, 0, nodes.as_mut_ptr(), nodes.len(), &mut written),
            IbrStatus::Ok
        );
        assert_eq!(written, info.nodes);
        assert_eq!(nodes[0].t, 0.0);
        let start = [-10_000.0, 0.0, 31_000.0];
        for (a, b) in nodes[0].position.iter().zip(start) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!((nodes[written - 1].t - info.final_time).abs() < 1e-9);

        let mut v = IbrVerifyInfo::default();
        assert_eq!(ibrscp_verify(run, 8, ptr::null(), 0, false, &mut v), IbrStatus::Validation);
        let ratios = [3.0];
        assert_eq!(
            ibrscp_verify(run, IBRSCP_LAW_PN, ratios.as_ptr(), 1, false, &mut v),
            IbrStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(v.runs, 1);
        assert_eq!(v.intercepts, 0);
        assert!(v.all_reach_asset);
        assert_eq!(ibrscp_report(run), IbrStatus::Ok);
        ibrscp_run_free(run);
    }
    assert!(dir.path().join("run/report/states.svg").is_file());
}

/// The `deps` directory holding this test binary and the static library.
fn deps_dir() -> PathBuf {
    std::env::current_exe().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("ibrscp.h")).unwrap();
    for f in ["ibrscp_solve", "ibrscp_verify", "ibrscp_report", "ibrscp_last_error", "IBR_STATUS_NUMERICAL"] {
        assert!(header.contains(f), "{f} missing from header");
    }
    let lib = deps_dir().join("libibrscp_ffi.a");
    assert!(lib.is_file(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/smoke.c");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let scenario = lone_evader_file(dir.path());
    let out = Command::new(&exe)
        .arg(&scenario)
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8_lossy(&out.stdout);
    assert!(line.trim_end().ends_with(env!("CARGO_PKG_VERSION")), "{line}");
}
