//! C ABI over `mtuc-core`.
//!
//! Every function returns an [`MtucStatus`]; results come back through out
//! pointers. On failure the message is kept per thread and read with
//! [`mtuc_last_error_message`]. Scenarios are opaque handles released with
//! [`mtuc_scenario_free`]; strings returned by the library are released with
//! [`mtuc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mtuc_core::baselines::{oracle, run_scheme, CacheMode, OffloadMode, OracleLimits, RoutingMode, SchemeSpec};
use mtuc_core::economics::{ProfitBreakdown, SystemModel};
use mtuc_core::scenario::{generate_random, DeviceCount, GenSpec, Scenario};
use mtuc_core::{Error, ScenarioError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtucStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidScenario = 3,
    Domain = 4,
    Infeasible = 5,
    TooLarge = 6,
    Io = 7,
    Internal = 8,
    Panic = 9,
}

/// Opaque scenario handle together with its precomputed system model.
pub struct MtucScenario {
    scenario: Scenario,
    model: SystemModel,
}

/// Profit terms of one evaluated decision set.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MtucBreakdown {
    pub profit: f64,
    pub revenue: f64,
    pub task_cost: f64,
    pub movement_cost: f64,
    pub fairness_penalty: f64,
    pub fairness_gap_s: f64,
}

impl From<&ProfitBreakdown> for MtucBreakdown {
    fn from(b: &ProfitBreakdown) -> Self {
        Self {
            profit: b.profit,
            revenue: b.revenue,
            task_cost: b.task_cost,
            movement_cost: b.movement_cost,
            fairness_penalty: b.fairness_penalty,
            fairness_gap_s: b.fairness_gap_s,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MtucStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Scenario(ScenarioError::Io { .. }) | Error::Io(_) => MtucStatus::Io,
            Error::Scenario(_) => MtucStatus::InvalidScenario,
            Error::Domain(_) | Error::Degenerate(_) | Error::ZeroRate | Error::Allocation(_) => MtucStatus::Domain,
            Error::Infeasible(_) | Error::InvalidAction(_) => MtucStatus::Infeasible,
            Error::TooLarge(_) => MtucStatus::TooLarge,
            _ => MtucStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Error::from(e).into()
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(MtucStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MtucStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MtucStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MtucStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(MtucStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(h: *const MtucScenario) -> Result<&'a MtucScenario, Failure> {
    h.as_ref().ok_or_else(|| Failure(MtucStatus::NullPointer, "scenario handle is null".into()))
}

fn out_ptr<T>(p: *mut T) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(MtucStatus::NullPointer, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

fn into_handle(scenario: Scenario) -> Result<*mut MtucScenario, Failure> {
    let model = SystemModel::new(&scenario)?;
    Ok(Box::into_raw(Box::new(MtucScenario { scenario, model })))
}

/// Last error message on this thread, or null if none. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mtuc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mtuc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generate a random scenario with `per_group` devices in each of `groups`
/// groups spread over a square of side `area_m` metres (`area_m <= 0` keeps
/// the default).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn mtuc_scenario_generate(
    groups: usize,
    auvs: usize,
    per_group: usize,
    area_m: f64,
    seed: u64,
    out: *mut *mut MtucScenario,
) -> MtucStatus {
    guard(|| {
        out_ptr(out)?;
        let mut spec = GenSpec::new(groups, auvs, DeviceCount::PerGroup(per_group));
        if area_m > 0.0 {
            spec.area_m = area_m;
        }
        *out = into_handle(generate_random(&spec, seed)?)?;
        Ok(())
    })
}

/// Parse a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtuc_scenario_from_toml(toml: *const c_char, out: *mut *mut MtucScenario) -> MtucStatus {
    guard(|| {
        out_ptr(out)?;
        let text = str_arg(toml, "toml")?;
        *out = into_handle(Scenario::from_toml(text)?)?;
        Ok(())
    })
}

/// Load a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtuc_scenario_load(path: *const c_char, out: *mut *mut MtucScenario) -> MtucStatus {
    guard(|| {
        out_ptr(out)?;
        let path = str_arg(path, "path")?;
        *out = into_handle(mtuc_core::load_scenario(path)?)?;
        Ok(())
    })
}

/// Release a scenario handle. Null is ignored.
///
/// # Safety
/// `h` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mtuc_scenario_free(h: *mut MtucScenario) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of groups, AUVs and devices of a scenario. Any out pointer may be null.
///
/// # Safety
/// `h` must be a live handle; non-null out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtuc_scenario_size(
    h: *const MtucScenario,
    groups: *mut usize,
    auvs: *mut usize,
    devices: *mut usize,
) -> MtucStatus {
    guard(|| {
        let s = &handle(h)?.scenario;
        for (p, v) in [(groups, s.num_groups()), (auvs, s.num_auvs), (devices, s.total_devices())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Serialize a scenario to TOML. Release the string with [`mtuc_string_free`].
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtuc_scenario_to_toml(h: *const MtucScenario, out: *mut *mut c_char) -> MtucStatus {
    guard(|| {
        out_ptr(out)?;
        let text = handle(h)?.scenario.to_toml()?;
        *out = CString::new(text).map_err(|_| invalid("scenario text contains NUL"))?.into_raw();
        Ok(())
    })
}

/// Content hash of a scenario as lowercase hex. Release with [`mtuc_string_free`].
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtuc_scenario_hash(h: *const MtucScenario, out: *mut *mut c_char) -> MtucStatus {
    guard(|| {
        out_ptr(out)?;
        *out = CString::new(handle(h)?.scenario.content_hash()).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mtuc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Evaluate a fixed scheme. `offload` and `cache` take `full`, `none`,
/// `random[:p]` or `partial[:share]`; `routing` takes `nearest`, `random`,
/// `agnostic` or `aware`. Null `cache` or `routing` selects `full` and
/// `agnostic`.
///
/// # Safety
/// String arguments must be NUL-terminated or null where allowed; `h` must
/// be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtuc_scheme_profit(
    h: *const MtucScenario,
    offload: *const c_char,
    cache: *const c_char,
    routing: *const c_char,
    seed: u64,
    out: *mut MtucBreakdown,
) -> MtucStatus {
    guard(|| {
        out_ptr(out)?;
        let sc = handle(h)?;
        let offload: OffloadMode = str_arg(offload, "offload")?.parse().map_err(invalid)?;
        let cache: CacheMode = if cache.is_null() { CacheMode::FullCapped } else { str_arg(cache, "cache")?.parse().map_err(invalid)? };
        let routing: RoutingMode = if routing.is_null() {
            RoutingMode::EnvAgnostic
        } else {
            str_arg(routing, "routing")?.parse().map_err(invalid)?
        };
        let spec = SchemeSpec::new(offload, cache).with_routing(routing);
        *out = (&run_scheme(&sc.model, &spec, seed)?.breakdown).into();
        Ok(())
    })
}

/// Exhaustive optimum over a resource lattice of step `grid` (a divisor of
/// 1 such as 0.25). Small instances only; larger ones return `TOO_LARGE`.
///
/// # Safety
/// `h` must be a live handle; `profit` must be valid; `nodes` may be null.
#[no_mangle]
pub unsafe extern "C" fn mtuc_oracle_profit(h: *const MtucScenario, grid: f64, profit: *mut f64, nodes: *mut u64) -> MtucStatus {
    guard(|| {
        out_ptr(profit)?;
        let r = oracle(&handle(h)?.model, grid, &OracleLimits::default())?;
        *profit = r.profit;
        if !nodes.is_null() {
            *nodes = r.nodes;
        }
        Ok(())
    })
}
