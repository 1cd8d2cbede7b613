//! C ABI over the `ibrscp` solver.
//!
//! Every fallible call returns an [`IbrStatus`]; on failure the message is
//! available from [`ibrscp_last_error`] on the same thread. Handles are
//! opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ibrscp::cli::{self, RecordedSummary, RunDir, RunSummary, VerifyOptions};
use ibrscp::dynamics::Role;
use ibrscp::scenario::Scenario;
use ibrscp::simulation::GuidanceKind;
use ibrscp::transcription::Trajectory;
use ibrscp::Error;

/// Result codes. `Validation` and `Numerical` match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbrStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Numerical = 3,
    InvalidUtf8 = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Guidance law bits for [`ibrscp_verify`].
pub const IBRSCP_LAW_PN: u32 = 1;
pub const IBRSCP_LAW_APN: u32 = 2;

/// A parsed, validated scenario.
pub struct IbrScenario {
    inner: Scenario,
}

/// A run directory with its summary and recorded evaders loaded.
pub struct IbrRun {
    dir: PathBuf,
    summary: RunSummary,
    recorded: Vec<(RecordedSummary, Trajectory)>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IbrRecordedInfo {
    /// Round at which the evader was recorded.
    pub iteration: usize,
    /// Round that produced the trajectory.
    pub source_iteration: usize,
    pub final_time: f64,
    pub terminal_speed: f64,
    pub nodes: usize,
}

/// One trajectory node in physical units (ft, ft/s, ft/s^2).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IbrNode {
    pub t: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub input: [f64; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IbrVerifyInfo {
    /// Engagements simulated (recorded evaders times modes).
    pub runs: usize,
    /// Pursuer instances that intercepted, summed over runs.
    pub intercepts: usize,
    /// True when every run ended with the evader reaching the asset.
    pub all_reach_asset: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: IbrStatus, msg: impl Into<String>) -> IbrStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> IbrStatus {
    let status = if e.exit_code() == 2 {
        IbrStatus::Validation
    } else {
        IbrStatus::Numerical
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), IbrStatus>) -> IbrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IbrStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(IbrStatus::Panic, msg)
        }
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, IbrStatus> {
    if p.is_null() {
        return Err(fail(IbrStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(IbrStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, IbrStatus> {
    p.as_ref()
        .ok_or_else(|| fail(IbrStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, IbrStatus> {
    p.as_mut()
        .ok_or_else(|| fail(IbrStatus::NullPointer, format!("{name} is null")))
}

fn load_run(dir: PathBuf) -> Result<IbrRun, IbrStatus> {
    let run = RunDir::open(&dir).map_err(from_error)?;
    let summary = run.summary().map_err(from_error)?;
    let recorded = run.recorded_evaders().map_err(from_error)?;
    Ok(IbrRun {
        dir,
        summary,
        recorded,
    })
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call on this thread.
#[no_mangle]
pub extern "C" fn ibrscp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ibrscp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_scenario_load(path: *const c_char, out_scenario: *mut *mut IbrScenario) -> IbrStatus {
    guard(|| {
        let slot = out(out_scenario, "out_scenario")?;
        *slot = std::ptr::null_mut();
        let path = path_arg(path, "path")?;
        let inner = Scenario::from_path(&path).map_err(from_error)?;
        *slot = Box::into_raw(Box::new(IbrScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from [`ibrscp_scenario_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_scenario_free(scenario: *mut IbrScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_scenario_pursuer_count(scenario: *const IbrScenario, count: *mut usize) -> IbrStatus {
    guard(|| {
        let s = borrow(scenario, "scenario")?;
        *out(count, "count")? = s.inner.players.iter().filter(|p| p.role == Role::Pursuer).count();
        Ok(())
    })
}

/// Overrides the round and SCP iteration counts; zero keeps the current value.
///
/// # Safety
/// `scenario` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_scenario_set_iterations(
    scenario: *mut IbrScenario,
    ibr_iterations: usize,
    scp_iterations: usize,
) -> IbrStatus {
    guard(|| {
        let s = out(scenario, "scenario")?;
        let mut next = s.inner.clone();
        if ibr_iterations > 0 {
            next.algorithm.ibr_iterations = ibr_iterations;
        }
        if scp_iterations > 0 {
            next.algorithm.scp_iterations = scp_iterations;
        }
        next.validate().map_err(from_error)?;
        s.inner = next;
        Ok(())
    })
}

/// Runs the game into `out_dir`, resuming a compatible partial run there.
///
/// # Safety
/// `scenario` must be a valid handle, `out_dir` a NUL-terminated string and
/// `out_run` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_solve(
    scenario: *const IbrScenario,
    out_dir: *const c_char,
    out_run: *mut *mut IbrRun,
) -> IbrStatus {
    guard(|| {
        let slot = out(out_run, "out_run")?;
        *slot = std::ptr::null_mut();
        let s = borrow(scenario, "scenario")?;
        let dir = path_arg(out_dir, "out_dir")?;
        cli::solve_scenario(&s.inner, &dir).map_err(from_error)?;
        *slot = Box::into_raw(Box::new(load_run(dir)?));
        Ok(())
    })
}

/// Opens an existing run directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out_run` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_run_open(dir: *const c_char, out_run: *mut *mut IbrRun) -> IbrStatus {
    guard(|| {
        let slot = out(out_run, "out_run")?;
        *slot = std::ptr::null_mut();
        let dir = path_arg(dir, "dir")?;
        *slot = Box::into_raw(Box::new(load_run(dir)?));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`ibrscp_solve`] or [`ibrscp_run_open`], or be null.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_run_free(run: *mut IbrRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_run_iterations(run: *const IbrRun, count: *mut usize) -> IbrStatus {
    guard(|| {
        *out(count, "count")? = borrow(run, "run")?.summary.iterations_completed;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_run_recorded_count(run: *const IbrRun, count: *mut usize) -> IbrStatus {
    guard(|| {
        *out(count, "count")? = borrow(run, "run")?.recorded.len();
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_run_recorded_info(
    run: *const IbrRun,
    index: usize,
    info: *mut IbrRecordedInfo,
) -> IbrStatus {
    guard(|| {
        let r = borrow(run, "run")?;
        let dst = out(info, "info")?;
        let (rec, traj) = r
            .recorded
            .get(index)
            .ok_or_else(|| fail(IbrStatus::OutOfRange, format!("recorded index {index} out of range")))?;
        *dst = IbrRecordedInfo {
            iteration: rec.iteration,
            source_iteration: rec.source_iteration,
            final_time: rec.final_time,
            terminal_speed: rec.terminal_speed,
            nodes: traj.nodes(),
        };
        Ok(())
    })
}

/// Copies up to `capacity` nodes of a recorded evader into `nodes` and
/// stores the number copied in `written`.
///
/// # Safety
/// `nodes` must point to at least `capacity` elements; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_run_recorded_nodes(
    run: *const IbrRun,
    index: usize,
    nodes: *mut IbrNode,
    capacity: usize,
    written: *mut usize,
) -> IbrStatus {
    guard(|| {
        let r = borrow(run, "run")?;
        let count = out(written, "written")?;
        *count = 0;
        let (_, traj) = r
            .recorded
            .get(index)
            .ok_or_else(|| fail(IbrStatus::OutOfRange, format!("recorded index {index} out of range")))?;
        let n = traj.nodes().min(capacity);
        if n > 0 && nodes.is_null() {
            return Err(fail(IbrStatus::NullPointer, "nodes is null"));
        }
        for k in 0..n {
            let s = &traj.states[k];
            *nodes.add(k) = IbrNode {
                t: traj.node_time(k),
                position: s.p.into(),
                velocity: s.v.into(),
                input: traj.inputs[k].into(),
            };
        }
        *count = n;
        Ok(())
    })
}

/// Replays every recorded evader against guided pursuers. `laws` is a mask
/// of `IBRSCP_LAW_*` bits and `ratios` a list of navigation ratios; zero or
/// null selects the scenario defaults.
///
/// # Safety
/// `ratios` must point to `n_ratios` values when non-null; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_verify(
    run: *const IbrRun,
    laws: u32,
    ratios: *const f64,
    n_ratios: usize,
    closed_loop: bool,
    info: *mut IbrVerifyInfo,
) -> IbrStatus {
    guard(|| {
        let r = borrow(run, "run")?;
        let dst = out(info, "info")?;
        if laws & !(IBRSCP_LAW_PN | IBRSCP_LAW_APN) != 0 {
            return Err(fail(IbrStatus::Validation, format!("unknown law bits {laws:#x}")));
        }
        let kinds = (laws != 0).then(|| {
            [(IBRSCP_LAW_PN, GuidanceKind::Pn), (IBRSCP_LAW_APN, GuidanceKind::Apn)]
                .into_iter()
                .filter(|(bit, _)| laws & bit != 0)
                .map(|(_, k)| k)
                .collect()
        });
        let ratios = (!ratios.is_null() && n_ratios > 0)
            .then(|| std::slice::from_raw_parts(ratios, n_ratios).to_vec());
        let opts = VerifyOptions {
            laws: kinds,
            ratios,
            closed_loop,
        };
        let v = cli::verify(&r.dir, &opts).map_err(from_error)?;
        *dst = IbrVerifyInfo {
            runs: v.runs.len(),
            intercepts: v.runs.iter().map(|x| x.intercepts).sum(),
            all_reach_asset: !v.runs.is_empty() && v.runs.iter().all(|x| x.outcome == "evader_reaches_asset"),
        };
        Ok(())
    })
}

/// Writes SVG figures and CSV data under the run's `report/` directory.
///
/// # Safety
/// `run` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ibrscp_report(run: *const IbrRun) -> IbrStatus {
    guard(|| {
        let r = borrow(run, "run")?;
        cli::report(&r.dir).map_err(from_error)?;
        Ok(())
    })
}
