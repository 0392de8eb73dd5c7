//! C ABI over `jps-core`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible call returns a [`JpsStatus`];
//! on failure the message is kept per thread and read with
//! [`jps_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jps_core::experiment::Context;
use jps_core::portsel::mm_s_baseline;
use jps_core::precoder::{monte_carlo_rate, McOptions};
use jps_core::scenario::Scenario;
use jps_core::{Error, PortSelection, RunConfig};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Selection = 4,
    /// A moment the closed form needs does not exist for this selection.
    DivergentMoment = 5,
    Numeric = 6,
    Io = 7,
    Panic = 8,
}

/// A generated scenario together with the run configuration that made it.
pub struct JpsScenario {
    ctx: Context,
    scenario: Scenario,
    index: usize,
}

/// A validated port selection.
pub struct JpsSelection {
    inner: PortSelection,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> JpsStatus {
    match e {
        Error::Config(_) | Error::UnknownExperiment(_) | Error::Placement { .. } | Error::Json(_) => JpsStatus::Config,
        Error::Selection(_) | Error::SearchSpace { .. } => JpsStatus::Selection,
        Error::DivergentMoment { .. } => JpsStatus::DivergentMoment,
        Error::Io(_) => JpsStatus::Io,
        Error::Round { source, .. } => status_of(source),
        _ => JpsStatus::Numeric,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (JpsStatus, String)>) -> JpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            JpsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            JpsStatus::Panic
        }
    }
}

fn core(e: Error) -> (JpsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (JpsStatus, String) {
    (JpsStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, (JpsStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (JpsStatus::InvalidUtf8, format!("`{name}`: {e}")))
}

unsafe fn reference<'a, T>(p: *const T, name: &str) -> Result<&'a T, (JpsStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (JpsStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn jps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Generate scenario `index` from configuration text (`section.key = value`
/// lines; an empty string selects the defaults) and `seed`.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out_scenario` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jps_scenario_new(config: *const c_char, seed: u64, index: usize, out_scenario: *mut *mut JpsScenario) -> JpsStatus {
    guard(|| {
        let slot = out(out_scenario, "out_scenario")?;
        *slot = ptr::null_mut();
        let cfg = RunConfig::parse(text(config, "config")?).map_err(core)?;
        let ctx = Context::new(cfg, Some(seed), ".");
        let scenario = ctx.scenario(&ctx.cfg.system, index).map_err(core)?;
        *slot = Box::into_raw(Box::new(JpsScenario { ctx, scenario, index }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from [`jps_scenario_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jps_scenario_free(scenario: *mut JpsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of BSs, antennas per BS and users.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn jps_scenario_dims(scenario: *const JpsScenario, n_bs: *mut usize, n_antennas: *mut usize, n_users: *mut usize) -> JpsStatus {
    guard(|| {
        let s = &reference(scenario, "scenario")?.scenario.stats;
        *out(n_bs, "n_bs")? = s.n_bs;
        *out(n_antennas, "n_antennas")? = s.n_antennas;
        *out(n_users, "n_users")? = s.n_users;
        Ok(())
    })
}

/// Average port power `β̄_{b,u,m}`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn jps_scenario_port_power(scenario: *const JpsScenario, bs: usize, user: usize, port: usize, value: *mut f64) -> JpsStatus {
    guard(|| {
        let s = &reference(scenario, "scenario")?.scenario.stats;
        if bs >= s.n_bs || user >= s.n_users || port >= s.n_antennas {
            return Err((JpsStatus::Config, format!("index ({bs}, {user}, {port}) out of range")));
        }
        *out(value, "value")? = s.beta(bs, user, port);
        Ok(())
    })
}

fn boxed(sel: PortSelection) -> *mut JpsSelection {
    Box::into_raw(Box::new(JpsSelection { inner: sel }))
}

/// GS-JPS selection with the configured budget, `N_rand` and sweep count.
/// `sum_rate` may be null.
///
/// # Safety
/// `scenario` and `out_selection` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jps_select_gs(scenario: *const JpsScenario, out_selection: *mut *mut JpsSelection, sum_rate: *mut f64) -> JpsStatus {
    guard(|| {
        let slot = out(out_selection, "out_selection")?;
        *slot = ptr::null_mut();
        let h = reference(scenario, "scenario")?;
        let cfg = &h.ctx.cfg;
        let model = h.ctx.model(&h.scenario, cfg.system.eps2()).map_err(core)?;
        let counts = h.ctx.counts(cfg.selection.ports_per_user, cfg.system.n_bs).map_err(core)?;
        let gs = h.ctx.gs(&model, &counts, h.index).map_err(core)?;
        if let Some(r) = sum_rate.as_mut() {
            *r = gs.sum_rate;
        }
        *slot = boxed(gs.selection);
        Ok(())
    })
}

/// MM-S baseline selection with the configured budget.
///
/// # Safety
/// `scenario` and `out_selection` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jps_select_mms(scenario: *const JpsScenario, out_selection: *mut *mut JpsSelection) -> JpsStatus {
    guard(|| {
        let slot = out(out_selection, "out_selection")?;
        *slot = ptr::null_mut();
        let h = reference(scenario, "scenario")?;
        let cfg = &h.ctx.cfg;
        let counts = h.ctx.counts(cfg.selection.ports_per_user, cfg.system.n_bs).map_err(core)?;
        *slot = boxed(mm_s_baseline(&h.scenario.stats, &counts).map_err(core)?);
        Ok(())
    })
}

/// Parse and validate a selection JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_selection` valid.
#[no_mangle]
pub unsafe extern "C" fn jps_selection_from_json(json: *const c_char, out_selection: *mut *mut JpsSelection) -> JpsStatus {
    guard(|| {
        let slot = out(out_selection, "out_selection")?;
        *slot = ptr::null_mut();
        *slot = boxed(PortSelection::from_json(text(json, "json")?).map_err(core)?);
        Ok(())
    })
}

/// Serialize a selection; release the string with [`jps_string_free`].
///
/// # Safety
/// `selection` and `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jps_selection_to_json(selection: *const JpsSelection, out_json: *mut *mut c_char) -> JpsStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = ptr::null_mut();
        let json = reference(selection, "selection")?.inner.to_json().map_err(core)?;
        *slot = CString::new(json).map_err(|e| (JpsStatus::Numeric, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `selection` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jps_selection_free(selection: *mut JpsSelection) {
    if !selection.is_null() {
        drop(Box::from_raw(selection));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn checked<'a>(h: &JpsScenario, sel: &'a JpsSelection) -> Result<&'a PortSelection, (JpsStatus, String)> {
    let sys = &h.ctx.cfg.system;
    sel.inner.check_shape(sys.n_bs, sys.n_antennas, sys.n_users).map_err(|e| core(e.into()))?;
    Ok(&sel.inner)
}

/// Closed-form sum rate at the configured error level. Fails with
/// `DivergentMoment` when a required inverse moment does not exist.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn jps_analytic_sum_rate(scenario: *const JpsScenario, selection: *const JpsSelection, sum_rate: *mut f64) -> JpsStatus {
    guard(|| {
        let h = reference(scenario, "scenario")?;
        let sel = checked(h, reference(selection, "selection")?)?;
        let slot = out(sum_rate, "sum_rate")?;
        let model = h.ctx.model(&h.scenario, h.ctx.cfg.system.eps2()).map_err(core)?;
        *slot = model.report(sel).map_err(core)?.sum_rate;
        Ok(())
    })
}

/// Monte Carlo sum rate over `n_real` realizations (0 uses the configured
/// count). `stderr` may be null.
///
/// # Safety
/// All non-optional pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn jps_mc_sum_rate(
    scenario: *const JpsScenario,
    selection: *const JpsSelection,
    n_real: usize,
    sum_rate: *mut f64,
    stderr: *mut f64,
) -> JpsStatus {
    guard(|| {
        let h = reference(scenario, "scenario")?;
        let sel = checked(h, reference(selection, "selection")?)?;
        let slot = out(sum_rate, "sum_rate")?;
        let cfg = &h.ctx.cfg;
        let n = if n_real == 0 { cfg.sim.n_real } else { n_real };
        let opts = McOptions { rank_tol: cfg.analytic.rank_tol, ..McOptions::default() };
        let sc = &h.scenario;
        let r = monte_carlo_rate(&sc.stats, sel, cfg.system.eps2(), &sc.power.per_user, sc.config.sigma_n2, n, h.ctx.mc_seed(h.index), &opts)
            .map_err(core)?;
        *slot = r.sum_rate;
        if let Some(se) = stderr.as_mut() {
            *se = r.sum_rate_stderr.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}
