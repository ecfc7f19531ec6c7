//! C ABI over the `evcs` engine.
//!
//! Objects cross the boundary as opaque handles created by `evcs_*_new` or
//! `evcs_*_load` style constructors and released with the matching
//! `evcs_*_free`. Every fallible call returns an [`EvcsStatus`]; on failure
//! the message is available from [`evcs_last_error_message`] on the same
//! thread. Panics never unwind into C: they are caught and reported as
//! [`EvcsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use evcs::config::SimConfig;
use evcs::harness::{self, DayResult, Forecasters};
use evcs::powerflow::{self, SlotDispatch};
use evcs::scheduler::{self, Scheme};
use evcs::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvcsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Contract = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvcsScheme {
    ChargeOnly = 0,
    Conventional = 1,
    Proposed = 2,
}

impl From<EvcsScheme> for Scheme {
    fn from(s: EvcsScheme) -> Self {
        match s {
            EvcsScheme::ChargeOnly => Scheme::ChargeOnly,
            EvcsScheme::Conventional => Scheme::Conventional,
            EvcsScheme::Proposed => Scheme::Proposed,
        }
    }
}

/// The six power flows of one slot plus its totals, all in kW.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvcsDispatch {
    pub grid_load: f64,
    pub grid_ev: f64,
    pub pv_load: f64,
    pub pv_ev: f64,
    pub ev_load: f64,
    pub ev_ev: f64,
    pub load: f64,
    pub pv_available: f64,
    pub ev_charge_total: f64,
    pub ev_discharge_total: f64,
}

impl From<&SlotDispatch> for EvcsDispatch {
    fn from(d: &SlotDispatch) -> Self {
        EvcsDispatch {
            grid_load: d.pw_grid_load,
            grid_ev: d.pw_grid_ev,
            pv_load: d.pw_pv_load,
            pv_ev: d.pw_pv_ev,
            ev_load: d.pw_ev_load,
            ev_ev: d.pw_ev_ev,
            load: d.pw_load,
            pv_available: d.pw_pv_avail,
            ev_charge_total: d.ev_charge_total,
            ev_discharge_total: d.ev_discharge_total,
        }
    }
}

impl From<&EvcsDispatch> for SlotDispatch {
    fn from(d: &EvcsDispatch) -> Self {
        SlotDispatch {
            pw_grid_load: d.grid_load,
            pw_grid_ev: d.grid_ev,
            pw_pv_load: d.pv_load,
            pw_pv_ev: d.pv_ev,
            pw_ev_load: d.ev_load,
            pw_ev_ev: d.ev_ev,
            pw_load: d.load,
            pw_pv_avail: d.pv_available,
            ev_charge_total: d.ev_charge_total,
            ev_discharge_total: d.ev_discharge_total,
        }
    }
}

/// Day-level figures of a simulated day.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvcsDaySummary {
    pub total_cost_usd: f64,
    pub local_load_cost_usd: f64,
    pub grid_kwh: f64,
    pub pv_kwh: f64,
    pub ev_charge_kwh: f64,
    pub ev_discharge_kwh: f64,
    pub evs_at_target: usize,
    pub evs_admitted: usize,
    pub violations: usize,
}

/// Opaque simulation configuration.
pub struct EvcsConfig(SimConfig);

/// Opaque pair of trained load and PV forecasters.
pub struct EvcsForecasters(Forecasters);

/// Opaque result of one simulated day.
pub struct EvcsDayResult(DayResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> EvcsStatus {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Csv { .. } => EvcsStatus::Config,
        Error::Usage(_) => EvcsStatus::InvalidArgument,
        Error::Contract(_) => EvcsStatus::Contract,
        Error::Io { .. } => EvcsStatus::Io,
    }
}

struct Fail(EvcsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(EvcsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(EvcsStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any failure for `evcs_last_error_message` and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EvcsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            EvcsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            EvcsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn slot_arg(slot: usize) -> Result<usize, Fail> {
    if slot < evcs::SLOTS_PER_DAY {
        Ok(slot)
    } else {
        Err(invalid(format!("slot {slot} outside 0..{}", evcs::SLOTS_PER_DAY)))
    }
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next `evcs_*` call on the thread.
#[no_mangle]
pub extern "C" fn evcs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default configuration (50 EVs, desk GA and forecaster profiles).
///
/// # Safety
/// `out_cfg` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn evcs_config_default(out_cfg: *mut *mut EvcsConfig) -> EvcsStatus {
    guard(|| {
        *out(out_cfg, "out_cfg")? = Box::into_raw(Box::new(EvcsConfig(SimConfig::default())));
        Ok(())
    })
}

/// Reads a `section.key = value` configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_cfg` must be writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_config_load(path: *const c_char, out_cfg: *mut *mut EvcsConfig) -> EvcsStatus {
    guard(|| {
        let slot = out(out_cfg, "out_cfg")?;
        let cfg = SimConfig::load(&path_arg(path, "path")?)?;
        *slot = Box::into_raw(Box::new(EvcsConfig(cfg)));
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must come from a config constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn evcs_config_free(cfg: *mut EvcsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Time-of-use purchase price at `slot`, USD/kWh.
///
/// # Safety
/// `cfg` must be a live handle and `out_price` writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_tariff_purchase_price(cfg: *const EvcsConfig, slot: usize, out_price: *mut f64) -> EvcsStatus {
    guard(|| {
        let cfg = deref(cfg, "cfg")?;
        *out(out_price, "out_price")? = cfg.0.tariff.purchase_price(slot_arg(slot)?);
        Ok(())
    })
}

/// Selling price (SMP plus weighted REC) at `slot`, USD/kWh.
///
/// # Safety
/// `cfg` must be a live handle and `out_price` writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_tariff_selling_price(cfg: *const EvcsConfig, slot: usize, out_price: *mut f64) -> EvcsStatus {
    guard(|| {
        let cfg = deref(cfg, "cfg")?;
        *out(out_price, "out_price")? = cfg.0.tariff.selling_price(slot_arg(slot)?);
        Ok(())
    })
}

/// Discharge cap from the current load and PV, kW.
///
/// # Safety
/// `cfg` must be a live handle and `out_cap` writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_cap_conventional(cfg: *const EvcsConfig, load_kw: f64, pv_kw: f64, out_cap: *mut f64) -> EvcsStatus {
    guard(|| {
        let cfg = deref(cfg, "cfg")?;
        *out(out_cap, "out_cap")? = scheduler::discharge_cap_conventional(load_kw, pv_kw, &cfg.0.scheduler);
        Ok(())
    })
}

/// Discharge cap from the current slot plus `n` forecast slots given as
/// parallel `load_kw` and `pv_kw` arrays, kW. `n` must equal the configured
/// lookahead; the arrays may be null when it is zero.
///
/// # Safety
/// `cfg` must be a live handle, the arrays must hold `n` values and
/// `out_cap` must be writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_cap_proposed(
    cfg: *const EvcsConfig,
    load_kw: f64,
    pv_kw: f64,
    forecast_load_kw: *const f64,
    forecast_pv_kw: *const f64,
    n: usize,
    out_cap: *mut f64,
) -> EvcsStatus {
    guard(|| {
        let cfg = deref(cfg, "cfg")?;
        let slot = out(out_cap, "out_cap")?;
        if n != cfg.0.scheduler.lookahead_k {
            return Err(invalid(format!("expected {} forecast slots, got {n}", cfg.0.scheduler.lookahead_k)));
        }
        let forecasts: Vec<(f64, f64)> = if n == 0 {
            Vec::new()
        } else {
            if forecast_load_kw.is_null() || forecast_pv_kw.is_null() {
                return Err(null("forecast array"));
            }
            let l = std::slice::from_raw_parts(forecast_load_kw, n);
            let p = std::slice::from_raw_parts(forecast_pv_kw, n);
            l.iter().copied().zip(p.iter().copied()).collect()
        };
        *slot = scheduler::discharge_cap_proposed((load_kw, pv_kw), &forecasts, &cfg.0.scheduler);
        Ok(())
    })
}

/// Allocates one slot's power flows in merit order. All inputs in kW and
/// non-negative.
///
/// # Safety
/// `out_dispatch` must be writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_dispatch(
    load_kw: f64,
    pv_kw: f64,
    ev_charge_kw: f64,
    ev_discharge_kw: f64,
    out_dispatch: *mut EvcsDispatch,
) -> EvcsStatus {
    guard(|| {
        let slot = out(out_dispatch, "out_dispatch")?;
        let inputs = [load_kw, pv_kw, ev_charge_kw, ev_discharge_kw];
        if inputs.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("dispatch inputs must be finite and non-negative"));
        }
        *slot = (&powerflow::dispatch(load_kw, pv_kw, ev_charge_kw, ev_discharge_kw)).into();
        Ok(())
    })
}

/// Operating cost of one slot's flows at `slot`'s prices, USD.
///
/// # Safety
/// `cfg` and `dispatch` must be valid; `out_cost` writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_slot_cost(
    cfg: *const EvcsConfig,
    dispatch: *const EvcsDispatch,
    slot: usize,
    out_cost: *mut f64,
) -> EvcsStatus {
    guard(|| {
        let cfg = deref(cfg, "cfg")?;
        let d: SlotDispatch = deref(dispatch, "dispatch")?.into();
        let t = slot_arg(slot)?;
        *out(out_cost, "out_cost")? = powerflow::slot_cost(&d, &cfg.0.tariff, t, cfg.0.scenario.dt_hours);
        Ok(())
    })
}

/// Trains (or loads, when checkpoints are configured) the forecasters the
/// proposed scheme needs. Training may take a minute at the desk profile.
///
/// # Safety
/// `cfg` must be a live handle; `out_forecasters` writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_forecasters_prepare(
    cfg: *const EvcsConfig,
    out_forecasters: *mut *mut EvcsForecasters,
) -> EvcsStatus {
    guard(|| {
        let cfg = deref(cfg, "cfg")?;
        let slot = out(out_forecasters, "out_forecasters")?;
        let f = harness::prepare_forecasters(&cfg.0.forecast, &cfg.0.scenario)?;
        *slot = Box::into_raw(Box::new(EvcsForecasters(f)));
        Ok(())
    })
}

/// Loads forecasters from two checkpoint files.
///
/// # Safety
/// Both paths must be NUL-terminated strings; `out_forecasters` writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_forecasters_load(
    load_checkpoint: *const c_char,
    pv_checkpoint: *const c_char,
    out_forecasters: *mut *mut EvcsForecasters,
) -> EvcsStatus {
    guard(|| {
        let slot = out(out_forecasters, "out_forecasters")?;
        let load = evcs::forecast::load_checkpoint(&path_arg(load_checkpoint, "load_checkpoint")?)?;
        let pv = evcs::forecast::load_checkpoint(&path_arg(pv_checkpoint, "pv_checkpoint")?)?;
        *slot = Box::into_raw(Box::new(EvcsForecasters(Forecasters { load, pv })));
        Ok(())
    })
}

/// Releases forecasters. Null is ignored.
///
/// # Safety
/// `f` must come from a forecaster constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn evcs_forecasters_free(f: *mut EvcsForecasters) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Simulates one day. `forecasters` may be null except for the proposed scheme.
///
/// # Safety
/// `cfg` must be a live handle, `forecasters` null or live, and
/// `out_result` writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_run_day(
    cfg: *const EvcsConfig,
    scheme: EvcsScheme,
    seed: u64,
    forecasters: *const EvcsForecasters,
    out_result: *mut *mut EvcsDayResult,
) -> EvcsStatus {
    guard(|| {
        let cfg = deref(cfg, "cfg")?;
        let slot = out(out_result, "out_result")?;
        let f = forecasters.as_ref().map(|f| &f.0);
        let r = harness::run_day(&cfg.0, scheme.into(), seed, f)?;
        *slot = Box::into_raw(Box::new(EvcsDayResult(r)));
        Ok(())
    })
}

/// Releases a day result. Null is ignored.
///
/// # Safety
/// `r` must come from `evcs_run_day` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn evcs_day_result_free(r: *mut EvcsDayResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Day totals.
///
/// # Safety
/// `r` must be a live handle and `out_summary` writable.
#[no_mangle]
pub unsafe extern "C" fn evcs_day_result_summary(r: *const EvcsDayResult, out_summary: *mut EvcsDaySummary) -> EvcsStatus {
    guard(|| {
        let r = &deref(r, "result")?.0;
        let (reached, admitted) = r.target_attainment();
        *out(out_summary, "out_summary")? = EvcsDaySummary {
            total_cost_usd: r.total_cost(),
            local_load_cost_usd: r.local_load_cost(),
            grid_kwh: r.grid_kwh(),
            pv_kwh: r.pv_kwh(),
            ev_charge_kwh: r.ev_charge_kwh(),
            ev_discharge_kwh: r.ev_discharge_kwh(),
            evs_at_target: reached,
            evs_admitted: admitted,
            violations: r.violations.len(),
        };
        Ok(())
    })
}

/// Flows, discharge cap (kW) and cost (USD) of one slot.
///
/// # Safety
/// `r` must be a live handle; each out pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn evcs_day_result_slot(
    r: *const EvcsDayResult,
    slot: usize,
    out_dispatch: *mut EvcsDispatch,
    out_cap_kw: *mut f64,
    out_cost_usd: *mut f64,
) -> EvcsStatus {
    guard(|| {
        let r = &deref(r, "result")?.0;
        let s = r
            .slots
            .get(slot)
            .ok_or_else(|| invalid(format!("slot {slot} outside 0..{}", r.slots.len())))?;
        if let Some(d) = out_dispatch.as_mut() {
            *d = (&s.dispatch).into();
        }
        if let Some(c) = out_cap_kw.as_mut() {
            *c = s.cap_kw;
        }
        if let Some(c) = out_cost_usd.as_mut() {
            *c = s.cost;
        }
        Ok(())
    })
}

/// Writes the per-slot, per-EV and summary CSV reports into `dir`.
///
/// # Safety
/// `r` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn evcs_day_result_write_reports(r: *const EvcsDayResult, dir: *const c_char) -> EvcsStatus {
    guard(|| {
        let r = deref(r, "result")?;
        let dir = path_arg(dir, "dir")?;
        harness::emit_reports(std::slice::from_ref(&r.0), &dir)?;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn evcs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
