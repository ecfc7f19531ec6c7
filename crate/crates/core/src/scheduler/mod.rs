//! Discharge-cap rules and the per-slot multi-objective GA.

mod ga;
mod objective;

use std::fmt;
use std::str::FromStr;

pub use ga::{optimize_slot, repair, GaConfig};
pub use objective::{evaluate, objective_components, Evaluation, Gene, Objectives, SlotContext};

use crate::error::{Error, Result};
use crate::powerflow::SlotDispatch;
use crate::fleet::Op;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Charging only; discharge alleles never offered.
    ChargeOnly,
    /// Cap from the instantaneous load-minus-PV condition.
    Conventional,
    /// Cap from the load-minus-PV sum over the current slot and K forecast slots.
    Proposed,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::ChargeOnly, Scheme::Conventional, Scheme::Proposed];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ChargeOnly => "charge_only",
            Scheme::Conventional => "conventional",
            Scheme::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "charge_only" => Ok(Scheme::ChargeOnly),
            "conventional" => Ok(Scheme::Conventional),
            "proposed" => Ok(Scheme::Proposed),
            _ => Err(Error::Usage(format!(
                "unknown scheme `{s}` (expected charge_only, conventional or proposed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    /// Load-minus-PV threshold PW^flag, kW.
    pub pw_flag: f64,
    /// Discharge cap when the condition holds, kW.
    pub dch_max_hi: f64,
    /// Discharge cap otherwise, kW.
    pub dch_max_lo: f64,
    /// Grid consumption cap, kW.
    pub pw_max: f64,
    /// Forecast slots K beyond the current one.
    pub lookahead_k: usize,
    pub ga: GaConfig,
    /// Weights for cost, grid-minus-PV, remaining-time priority, SOC-gap priority, utilization.
    pub weights: [f64; 5],
    pub scheme: Scheme,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            pw_flag: 86.0,
            dch_max_hi: 12.0,
            dch_max_lo: 2.0,
            pw_max: 157.0,
            lookahead_k: 7,
            ga: GaConfig::desk(),
            weights: [1.0, 0.2, 0.2, 0.2, 0.2],
            scheme: Scheme::Proposed,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dch_max_hi > self.dch_max_lo && self.dch_max_lo >= 0.0) {
            // The degenerate hi == lo == 0 configuration disables discharge entirely.
            if !(self.dch_max_hi == 0.0 && self.dch_max_lo == 0.0) {
                return Err(Error::config("scheduler caps must satisfy dch_max_hi > dch_max_lo >= 0"));
            }
        }
        if !(self.pw_flag > 0.0) {
            return Err(Error::config("scheduler.pw_flag must be > 0"));
        }
        if !(self.pw_max >= 0.0) {
            return Err(Error::config("scheduler.pw_max must be >= 0"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || !(self.weights[0] > 0.0) {
            return Err(Error::config("objective weights must be >= 0 with the cost weight > 0"));
        }
        self.ga.validate()
    }
}

/// Cap from the current load-minus-PV difference.
pub fn discharge_cap_conventional(load_kw: f64, pv_kw: f64, cfg: &SchedulerConfig) -> f64 {
    if load_kw - pv_kw >= cfg.pw_flag {
        cfg.dch_max_hi
    } else {
        cfg.dch_max_lo
    }
}

/// Cap from the cumulative load-minus-PV difference over the current slot
/// and `forecasts` (the next K slots). Falls back to the conventional rule
/// when the forecast does not have exactly K entries.
pub fn discharge_cap_proposed(now: (f64, f64), forecasts: &[(f64, f64)], cfg: &SchedulerConfig) -> f64 {
    if forecasts.len() != cfg.lookahead_k {
        log::warn!(
            "expected {} forecast slots, got {}; using the instantaneous cap rule",
            cfg.lookahead_k,
            forecasts.len()
        );
        return discharge_cap_conventional(now.0, now.1, cfg);
    }
    let sum = forecasts
        .iter()
        .fold(now.0 - now.1, |acc, (load, pv)| acc + (load - pv));
    if sum >= (cfg.lookahead_k + 1) as f64 * cfg.pw_flag {
        cfg.dch_max_hi
    } else {
        cfg.dch_max_lo
    }
}

/// Per-EV operations for one slot and what they lead to.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleDecision {
    /// `(fleet index, op)` for every candidate EV; other EVs idle.
    pub ops: Vec<(usize, Op)>,
    pub dispatch: SlotDispatch,
    pub fitness: f64,
    pub objectives: Objectives,
    /// Discharge cap, discharge-vs-demand bound and grid cap all hold.
    pub feasible: bool,
}

impl ScheduleDecision {
    pub fn op_of(&self, fleet_index: usize) -> Op {
        self.ops
            .iter()
            .find(|(i, _)| *i == fleet_index)
            .map(|(_, op)| *op)
            .unwrap_or(Op::Idle)
    }
}
