use serde::Serialize;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::fleet::{
    classify_candidates, load_fleet_csv, plan_charging, sample_fleet, EvState, FleetConfig, Op,
};
use crate::forecast::INPUT_LEN;
use crate::powerflow::{dispatch, grid_draw, local_load_cost, slot_cost, SlotDispatch, BALANCE_TOL_KW};
use crate::scheduler::{
    discharge_cap_conventional, discharge_cap_proposed, optimize_slot, Gene, Scheme, SchedulerConfig, SlotContext,
};
use crate::SLOTS_PER_DAY;

use super::Forecasters;

/// Everything a day needs besides configuration.
#[derive(Debug, Clone)]
pub struct DayInputs {
    pub load: Vec<f64>,
    pub pv: Vec<f64>,
    pub fleet: Vec<EvState>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub t: usize,
    pub ev: Option<usize>,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub t: usize,
    pub cap_kw: f64,
    /// Load-minus-PV sum over the lookahead horizon, proposed scheme only.
    pub lookahead_sum_kw: Option<f64>,
    pub dispatch: SlotDispatch,
    pub cost: f64,
    pub local_load_cost: f64,
    pub n_charge: usize,
    pub n_discharge: usize,
    pub n_candidates: usize,
    pub fitness: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvSlotRecord {
    pub t: usize,
    pub id: usize,
    pub soc_before: f64,
    pub soc_after: f64,
    pub op: Op,
}

#[derive(Debug, Clone)]
pub struct DayResult {
    pub scheme: Scheme,
    pub seed: u64,
    pub dt_hours: f64,
    pub slots: Vec<SlotRecord>,
    pub ev_log: Vec<EvSlotRecord>,
    /// Fleet at the end of the day.
    pub fleet: Vec<EvState>,
    pub violations: Vec<Violation>,
}

impl DayResult {
    fn energy(&self, f: impl Fn(&SlotDispatch) -> f64) -> f64 {
        self.slots.iter().map(|s| f(&s.dispatch) * self.dt_hours).sum()
    }

    /// Operating cost over the day, USD.
    pub fn total_cost(&self) -> f64 {
        self.slots.iter().map(|s| s.cost).sum()
    }

    pub fn local_load_cost(&self) -> f64 {
        self.slots.iter().map(|s| s.local_load_cost).sum()
    }

    pub fn grid_kwh(&self) -> f64 {
        self.energy(|d| d.pw_grid_load + d.pw_grid_ev)
    }

    pub fn pv_kwh(&self) -> f64 {
        self.energy(SlotDispatch::pv_used)
    }

    pub fn ev_charge_kwh(&self) -> f64 {
        self.energy(|d| d.ev_charge_total)
    }

    pub fn ev_discharge_kwh(&self) -> f64 {
        self.energy(|d| d.ev_discharge_total)
    }

    /// (EVs at target by departure, EVs admitted for charging).
    pub fn target_attainment(&self) -> (usize, usize) {
        let admitted: Vec<&EvState> = self.fleet.iter().filter(|e| e.mode.power_kw() > 0.0).collect();
        let reached = admitted.iter().filter(|e| e.reached_target(self.dt_hours)).count();
        (reached, admitted.len())
    }

    pub fn pct_at_target(&self) -> f64 {
        let (r, n) = self.target_attainment();
        if n == 0 {
            100.0
        } else {
            100.0 * r as f64 / n as f64
        }
    }
}

/// Builds the configured scenario for `seed` (profiles and fleet) and simulates it.
pub fn run_day(cfg: &SimConfig, scheme: Scheme, seed: u64, forecasters: Option<&Forecasters>) -> Result<DayResult> {
    cfg.validate()?;
    let (load, pv) = cfg.scenario.profiles(seed)?;
    let fleet_cfg = FleetConfig {
        rng_seed: seed,
        ..cfg.fleet.clone()
    };
    let fleet = match &cfg.scenario.fleet_csv {
        Some(p) => load_fleet_csv(p, &fleet_cfg)?,
        None => sample_fleet(&fleet_cfg)?,
    };
    run_day_with(DayInputs { load, pv, fleet }, cfg, scheme, seed, forecasters)
}

fn slot_seed(seed: u64, t: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (t as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Forecast (load, pv) pairs for the `k` slots after `t`, from the last 12
/// measured samples. The day is treated as cyclic at midnight.
fn lookahead(f: &Forecasters, load: &[f64], pv: &[f64], t: usize, k: usize, pv_cap: f64) -> Result<Vec<(f64, f64)>> {
    let window = |s: &[f64]| -> Vec<f64> {
        (0..INPUT_LEN)
            .map(|j| s[(t + SLOTS_PER_DAY * 2 + 1 + j - INPUT_LEN) % SLOTS_PER_DAY])
            .collect()
    };
    let l = f.load.predict(&window(load))?;
    let p = f.pv.predict(&window(pv))?;
    Ok(l.into_iter()
        .zip(p)
        .take(k)
        .map(|(l, p)| (l.max(0.0), p.clamp(0.0, pv_cap)))
        .collect())
}

/// Simulates one day on explicit inputs.
pub fn run_day_with(
    inputs: DayInputs,
    cfg: &SimConfig,
    scheme: Scheme,
    seed: u64,
    forecasters: Option<&Forecasters>,
) -> Result<DayResult> {
    let DayInputs { load, pv, mut fleet } = inputs;
    if load.len() != SLOTS_PER_DAY || pv.len() != SLOTS_PER_DAY {
        return Err(Error::Usage(format!("load and pv must have {SLOTS_PER_DAY} slots")));
    }
    let sched = SchedulerConfig {
        scheme,
        ..cfg.scheduler.clone()
    };
    sched.validate()?;
    let forecasters = match (scheme, forecasters) {
        (Scheme::Proposed, None) => {
            return Err(Error::Usage("the proposed scheme needs trained forecasters".into()));
        }
        (_, f) => f,
    };
    let fcfg = &cfg.fleet;
    let dt = fcfg.dt_hours;
    let mut slots = Vec::with_capacity(SLOTS_PER_DAY);
    let mut ev_log = Vec::new();
    let mut violations = Vec::new();
    // Day-ahead power available to EVs under the grid cap.
    let headroom: Vec<f64> = load.iter().zip(&pv).map(|(l, p)| sched.pw_max - l + p).collect();

    for t in 0..SLOTS_PER_DAY {
        let (load_t, pv_t) = (load[t], pv[t]);
        let mut lookahead_sum_kw = None;
        let cap = match scheme {
            Scheme::ChargeOnly => 0.0,
            Scheme::Conventional => discharge_cap_conventional(load_t, pv_t, &sched),
            Scheme::Proposed => {
                let f = forecasters.expect("checked above");
                let fc = lookahead(f, &load, &pv, t, sched.lookahead_k, cfg.scenario.pv_capacity_kw)?;
                lookahead_sum_kw = Some(fc.iter().fold(load_t - pv_t, |acc, (l, p)| acc + l - p));
                discharge_cap_proposed((load_t, pv_t), &fc, &sched)
            }
        };

        let cands = classify_candidates(&fleet, t, fcfg);
        let plan = plan_charging(&fleet, t, &headroom, fcfg);
        let mut idx: Vec<usize> = cands.charge.iter().chain(&cands.discharge).copied().collect();
        idx.sort_unstable();
        idx.dedup();
        let genes: Vec<Gene> = idx
            .iter()
            .map(|&i| {
                let ev = &fleet[i];
                let can_ch = cands.charge.binary_search(&i).is_ok();
                let can_dch = scheme != Scheme::ChargeOnly
                    && cands.discharge.binary_search(&i).is_ok()
                    && ev.power_kw() <= cap + BALANCE_TOL_KW;
                let forced = plan.forced.binary_search(&i).is_ok();
                let mut legal = Vec::with_capacity(3);
                if !forced {
                    legal.push(Op::Idle);
                }
                if can_ch && plan.allowed.binary_search(&i).is_ok() {
                    legal.push(Op::Charge);
                }
                if can_dch && !forced {
                    legal.push(Op::Discharge);
                }
                // Continuing the current operation is the default allele.
                if let Some(pos) = legal.iter().position(|op| *op == ev.current_op()) {
                    legal.swap(0, pos);
                }
                let t_c = ev.slots_to_target(dt);
                Gene {
                    fleet_index: i,
                    id: ev.id,
                    power_kw: ev.power_kw(),
                    soc: ev.soc,
                    target: ev.target,
                    t_re: ev.remaining_slots(t),
                    slack: ev.remaining_slots(t).saturating_sub(t_c),
                    alleles: legal,
                    must_charge: forced,
                    stop_cost: match ev.current_op() {
                        Op::Charge if ev.on_last_charge_episode(fcfg.n_max_switches) => 2,
                        Op::Charge => 1,
                        _ => 0,
                    },
                }
            })
            .filter(|g| !g.alleles.is_empty())
            .collect();

        let ctx = SlotContext {
            t,
            load_kw: load_t,
            pv_kw: pv_t,
            cap_kw: cap,
            dt_hours: dt,
            target_soc: fcfg.target_soc,
            tariff: &cfg.tariff,
        };
        let decision = optimize_slot(&genes, &ctx, &sched, slot_seed(seed, t));

        let (mut ch, mut dch) = (0.0, 0.0);
        let (mut n_ch, mut n_dch) = (0, 0);
        for (i, ev) in fleet.iter_mut().enumerate() {
            if !ev.is_present(t) {
                continue;
            }
            let mut op = decision.op_of(i);
            let soc_before = ev.soc;
            let id = ev.id;
            let flag = |what: String| Violation { t, ev: Some(id), what };
            if op == Op::Discharge && soc_before <= ev.soc_min {
                violations.push(flag(format!("discharge at soc {soc_before:.3}")));
            }
            if op == Op::Charge && soc_before >= ev.target {
                violations.push(flag(format!("charge at soc {soc_before:.3}")));
            }
            if let Err(e) = ev.step_soc(op, dt) {
                violations.push(flag(e.to_string()));
                op = Op::Idle;
                ev.step_soc(op, dt)?;
            }
            if ev.ch_transitions > fcfg.n_max_switches || ev.dch_transitions > fcfg.n_max_switches {
                violations.push(Violation {
                    t,
                    ev: Some(ev.id),
                    what: format!("switch budget exceeded: {}/{}", ev.ch_transitions, ev.dch_transitions),
                });
            }
            match op {
                Op::Charge => {
                    ch += ev.power_kw();
                    n_ch += 1;
                }
                Op::Discharge => {
                    dch += ev.power_kw();
                    n_dch += 1;
                }
                Op::Idle => {}
            }
            ev_log.push(EvSlotRecord {
                t,
                id: ev.id,
                soc_before,
                soc_after: ev.soc,
                op,
            });
        }

        let d = dispatch(load_t, pv_t, ch, dch);
        let mut slot_flag = |what: String| violations.push(Violation { t, ev: None, what });
        if dch > cap + BALANCE_TOL_KW {
            slot_flag(format!("discharge {dch} kW above cap {cap} kW"));
        }
        if dch > load_t + ch + BALANCE_TOL_KW {
            slot_flag(format!("discharge {dch} kW exceeds demand"));
        }
        if grid_draw(&d) > sched.pw_max + BALANCE_TOL_KW {
            slot_flag(format!("grid draw {:.3} kW above {} kW", grid_draw(&d), sched.pw_max));
        }
        for v in d.violations() {
            slot_flag(v);
        }
        if scheme == Scheme::ChargeOnly && dch > 0.0 {
            slot_flag("discharge under the charge-only scheme".into());
        }

        slots.push(SlotRecord {
            t,
            cap_kw: cap,
            lookahead_sum_kw,
            dispatch: d,
            cost: slot_cost(&d, &cfg.tariff, t, dt),
            local_load_cost: local_load_cost(&d, &cfg.tariff, t, dt),
            n_charge: n_ch,
            n_discharge: n_dch,
            n_candidates: genes.len(),
            fitness: decision.fitness,
            feasible: decision.feasible,
        });
    }

    Ok(DayResult {
        scheme,
        seed,
        dt_hours: dt,
        slots,
        ev_log,
        fleet,
        violations,
    })
}
