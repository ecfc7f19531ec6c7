//! EV population, charging-mode assignment, SOC dynamics and per-slot
//! candidate classification.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{SLOTS_PER_DAY, SLOT_HOURS};

/// On-off charger power level assigned on entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChargingMode {
    /// Entry denied.
    M0,
    M1,
    M2,
}

impl ChargingMode {
    pub fn power_kw(self) -> f64 {
        match self {
            ChargingMode::M0 => 0.0,
            ChargingMode::M1 => 7.0,
            ChargingMode::M2 => 19.2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChargingMode::M0 => "M0",
            ChargingMode::M1 => "M1",
            ChargingMode::M2 => "M2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    #[default]
    Idle,
    Charge,
    Discharge,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Idle => "idle",
            Op::Charge => "charge",
            Op::Discharge => "discharge",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetConfig {
    pub n_evs: usize,
    pub capacity_kwh: f64,
    /// Percent.
    pub init_soc_mean: f64,
    pub init_soc_std: f64,
    pub target_soc: f64,
    pub soc_min: f64,
    pub eta_ch: f64,
    pub eta_dch: f64,
    /// Margin time T_w in slots.
    pub margin_slots: usize,
    /// Per-direction budget of on/off transitions.
    pub n_max_switches: u32,
    /// Only EVs parked strictly longer than this may discharge.
    pub v2g_min_park_slots: usize,
    /// Extra slots a discharging EV must keep in hand for its recharge.
    pub urgency_slack_slots: usize,
    /// Priority credit, in slots, for EVs already charging so close calls do
    /// not preempt them.
    pub charge_hysteresis_slots: i64,
    /// A paused EV resumes once its planned start is at most this many slots away.
    pub final_start_lead_slots: i64,
    pub dt_hours: f64,
    pub rng_seed: u64,
    /// Workplace arrival ~ N(mean, std), in slots.
    pub arrival_mean_slot: f64,
    pub arrival_std_slots: f64,
    /// Home arrival (= workplace departure) ~ N(mean, std), in slots.
    pub departure_mean_slot: f64,
    pub departure_std_slots: f64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            n_evs: 50,
            capacity_kwh: 64.0,
            init_soc_mean: 15.0,
            init_soc_std: 5.0,
            target_soc: 80.0,
            soc_min: 20.0,
            eta_ch: 0.95,
            eta_dch: 0.95,
            margin_slots: 8,
            n_max_switches: 4,
            v2g_min_park_slots: 40,
            urgency_slack_slots: 1,
            charge_hysteresis_slots: 4,
            final_start_lead_slots: 0,
            dt_hours: SLOT_HOURS,
            rng_seed: 0,
            arrival_mean_slot: (10.0 * 60.0 + 20.0) / 15.0,
            arrival_std_slots: 8.0,
            departure_mean_slot: 72.0,
            departure_std_slots: 8.0,
        }
    }
}

impl FleetConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::config(msg)) };
        check(self.n_evs >= 1, "fleet.n_evs must be >= 1")?;
        check(self.capacity_kwh > 0.0, "fleet.capacity_kwh must be > 0")?;
        check(self.eta_ch > 0.0 && self.eta_ch <= 1.0, "fleet.eta_ch must be in (0, 1]")?;
        check(self.eta_dch > 0.0 && self.eta_dch <= 1.0, "fleet.eta_dch must be in (0, 1]")?;
        check(
            0.0 <= self.soc_min && self.soc_min <= self.target_soc && self.target_soc <= 100.0,
            "fleet SOC bounds must satisfy 0 <= soc_min <= target_soc <= 100",
        )?;
        check(self.init_soc_std >= 0.0, "fleet.init_soc_std must be >= 0")?;
        check(self.dt_hours > 0.0, "fleet.dt_hours must be > 0")?;
        check(
            self.arrival_std_slots >= 0.0 && self.departure_std_slots >= 0.0,
            "arrival spreads must be >= 0",
        )
    }
}

/// One vehicle's battery and parking state.
#[derive(Debug, Clone, PartialEq)]
pub struct EvState {
    pub id: usize,
    pub capacity_kwh: f64,
    pub eta_ch: f64,
    pub eta_dch: f64,
    pub soc: f64,
    pub init_soc: f64,
    pub soc_min: f64,
    pub target: f64,
    pub arrival_slot: usize,
    /// First slot the EV is gone; parked over `[arrival_slot, departure_slot)`.
    pub departure_slot: usize,
    pub mode: ChargingMode,
    pub v2g_eligible: bool,
    /// Charging switch function, one entry per slot since arrival.
    pub o_ch: Vec<bool>,
    pub o_dch: Vec<bool>,
    pub ch_transitions: u32,
    pub dch_transitions: u32,
}

impl EvState {
    /// Builds a parked EV and assigns its charging mode.
    pub fn new(id: usize, arrival_slot: usize, departure_slot: usize, init_soc: f64, cfg: &FleetConfig) -> Self {
        let mut ev = EvState {
            id,
            capacity_kwh: cfg.capacity_kwh,
            eta_ch: cfg.eta_ch,
            eta_dch: cfg.eta_dch,
            soc: init_soc,
            init_soc,
            soc_min: cfg.soc_min,
            target: cfg.target_soc,
            arrival_slot,
            departure_slot,
            mode: ChargingMode::M0,
            v2g_eligible: departure_slot.saturating_sub(arrival_slot) > cfg.v2g_min_park_slots,
            o_ch: Vec::new(),
            o_dch: Vec::new(),
            ch_transitions: 0,
            dch_transitions: 0,
        };
        ev.mode = assign_mode(&ev, cfg);
        ev
    }

    /// T_p in slots.
    pub fn parking_slots(&self) -> usize {
        self.departure_slot.saturating_sub(self.arrival_slot)
    }

    /// T_re(t) = departure - t.
    pub fn remaining_slots(&self, t: usize) -> usize {
        self.departure_slot.saturating_sub(t)
    }

    pub fn is_present(&self, t: usize) -> bool {
        self.arrival_slot <= t && t < self.departure_slot
    }

    /// Present and admitted (mode other than M0).
    pub fn is_active(&self, t: usize) -> bool {
        self.mode != ChargingMode::M0 && self.is_present(t)
    }

    pub fn switch_events(&self) -> u32 {
        self.ch_transitions + self.dch_transitions
    }

    pub fn current_op(&self) -> Op {
        match (self.o_ch.last(), self.o_dch.last()) {
            (Some(true), _) => Op::Charge,
            (_, Some(true)) => Op::Discharge,
            _ => Op::Idle,
        }
    }

    pub fn power_kw(&self) -> f64 {
        self.mode.power_kw()
    }

    /// SOC change in percent for one slot of `op` at the assigned mode power.
    pub fn soc_delta(&self, op: Op, dt_hours: f64) -> f64 {
        let energy = self.power_kw() * dt_hours;
        match op {
            Op::Idle => 0.0,
            Op::Charge => 100.0 * self.eta_ch * energy / self.capacity_kwh,
            Op::Discharge => -100.0 * energy / (self.eta_dch * self.capacity_kwh),
        }
    }

    /// Slots of continuous charging needed to reach target from `soc` at `power_kw`.
    pub fn slots_to_target_at(&self, soc: f64, power_kw: f64, dt_hours: f64) -> usize {
        let gap = self.target - soc;
        if gap <= 0.0 {
            return 0;
        }
        if power_kw <= 0.0 {
            return usize::MAX;
        }
        let energy = gap / 100.0 * self.capacity_kwh;
        let slots = energy / (self.eta_ch * power_kw * dt_hours);
        // Guard against 26.000000000004 style rounding.
        (slots - 1e-9).ceil().max(0.0) as usize
    }

    /// T_c at the assigned mode from the current SOC.
    pub fn slots_to_target(&self, dt_hours: f64) -> usize {
        self.slots_to_target_at(self.soc, self.power_kw(), dt_hours)
    }

    /// Applies one slot of `op`, updating SOC, the switch-function history
    /// and the transition counters.
    pub fn step_soc(&mut self, op: Op, dt_hours: f64) -> Result<()> {
        let soc = self.soc + self.soc_delta(op, dt_hours);
        if !(0.0..=100.0).contains(&soc) {
            return Err(Error::Contract(format!(
                "EV {} would leave [0, 100] %: {:.3} -> {:.3} on {}",
                self.id,
                self.soc,
                soc,
                op.as_str()
            )));
        }
        let prev = self.current_op();
        if (prev == Op::Charge) != (op == Op::Charge) {
            self.ch_transitions += 1;
        }
        if (prev == Op::Discharge) != (op == Op::Discharge) {
            self.dch_transitions += 1;
        }
        self.o_ch.push(op == Op::Charge);
        self.o_dch.push(op == Op::Discharge);
        self.soc = soc;
        Ok(())
    }

    fn can_start(&self, op: Op, transitions: u32, n_max: u32) -> bool {
        // A fresh episode reserves its closing transition as well.
        self.current_op() == op || transitions + 2 <= n_max
    }

    pub fn can_charge(&self, n_max: u32) -> bool {
        self.can_start(Op::Charge, self.ch_transitions, n_max)
    }

    pub fn can_discharge(&self, n_max: u32) -> bool {
        self.can_start(Op::Discharge, self.dch_transitions, n_max)
    }

    /// Charging now, and stopping would leave no budget to start again.
    pub fn on_last_charge_episode(&self, n_max: u32) -> bool {
        self.current_op() == Op::Charge && self.ch_transitions + 3 > n_max
    }

    /// Idle now, and a charge started now could not be paused and resumed.
    pub fn next_charge_is_last(&self, n_max: u32) -> bool {
        self.current_op() != Op::Charge && self.ch_transitions + 3 > n_max
    }

    /// Whether the EV reached `target` less one charging slot's increment.
    pub fn reached_target(&self, dt_hours: f64) -> bool {
        self.soc >= self.target - self.soc_delta(Op::Charge, dt_hours) - 1e-9
    }
}

/// Number of 0<->1 changes in a switch-function history, starting from 0.
pub fn count_transitions(history: &[bool]) -> u32 {
    let mut prev = false;
    let mut n = 0;
    for &on in history {
        if on != prev {
            n += 1;
        }
        prev = on;
    }
    n
}

/// Charging mode by minimum charge time plus margin: M1 if it fits, else M2, else denied.
pub fn assign_mode(ev: &EvState, cfg: &FleetConfig) -> ChargingMode {
    let tp = ev.parking_slots();
    let tc1 = ev.slots_to_target_at(ev.soc, ChargingMode::M1.power_kw(), cfg.dt_hours);
    let tc2 = ev.slots_to_target_at(ev.soc, ChargingMode::M2.power_kw(), cfg.dt_hours);
    if tp >= tc1.saturating_add(cfg.margin_slots) {
        ChargingMode::M1
    } else if tp >= tc2.saturating_add(cfg.margin_slots) {
        ChargingMode::M2
    } else {
        ChargingMode::M0
    }
}

fn draw_slot(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> usize {
    let x = if std > 0.0 {
        Normal::new(mean, std).expect("std checked").sample(rng)
    } else {
        mean
    };
    x.round().clamp(0.0, (SLOTS_PER_DAY - 1) as f64) as usize
}

/// Samples `n_evs` commuters: arrival at the workplace, departure at home
/// arrival time, normal initial SOC clamped to `[1, target - 1]`.
pub fn sample_fleet(cfg: &FleetConfig) -> Result<Vec<EvState>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let soc_dist = (cfg.init_soc_std > 0.0)
        .then(|| Normal::new(cfg.init_soc_mean, cfg.init_soc_std).expect("std checked"));
    let mut fleet = Vec::with_capacity(cfg.n_evs);
    for id in 0..cfg.n_evs {
        let mut window = None;
        for _ in 0..1000 {
            let a = draw_slot(&mut rng, cfg.arrival_mean_slot, cfg.arrival_std_slots);
            let d = draw_slot(&mut rng, cfg.departure_mean_slot, cfg.departure_std_slots);
            if d > a {
                window = Some((a, d));
                break;
            }
        }
        let (arrival, departure) = window.unwrap_or_else(|| {
            let a = draw_slot(&mut rng, cfg.arrival_mean_slot, cfg.arrival_std_slots);
            (a, a + 1)
        });
        let soc = match &soc_dist {
            Some(d) => d.sample(&mut rng),
            None => cfg.init_soc_mean,
        };
        let soc = soc.clamp(1.0, (cfg.target_soc - 1.0).max(1.0));
        fleet.push(EvState::new(id, arrival, departure, soc, cfg));
    }
    Ok(fleet)
}

/// Reads `id,arrival_slot,departure_slot,init_soc` rows.
pub fn load_fleet_csv(path: &Path, cfg: &FleetConfig) -> Result<Vec<EvState>> {
    #[derive(Deserialize)]
    struct Row {
        id: usize,
        arrival_slot: usize,
        departure_slot: usize,
        init_soc: f64,
    }
    cfg.validate()?;
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut fleet = Vec::new();
    for row in rdr.deserialize() {
        let r: Row = row.map_err(|e| Error::csv(path, e))?;
        if r.departure_slot <= r.arrival_slot || r.arrival_slot >= SLOTS_PER_DAY || r.departure_slot > SLOTS_PER_DAY {
            return Err(Error::config(format!("EV {}: bad parking window", r.id)));
        }
        if !(0.0..=100.0).contains(&r.init_soc) {
            return Err(Error::config(format!("EV {}: init_soc out of range", r.id)));
        }
        fleet.push(EvState::new(r.id, r.arrival_slot, r.departure_slot, r.init_soc, cfg));
    }
    Ok(fleet)
}

/// Indices into the fleet of EVs legally assignable in one slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Candidates {
    pub charge: Vec<usize>,
    pub discharge: Vec<usize>,
}

pub fn is_charge_candidate(ev: &EvState, t: usize, cfg: &FleetConfig) -> bool {
    ev.is_active(t) && ev.soc < ev.target && ev.can_charge(cfg.n_max_switches)
}

pub fn is_discharge_candidate(ev: &EvState, t: usize, cfg: &FleetConfig) -> bool {
    if !(ev.is_active(t) && ev.v2g_eligible && ev.soc > ev.soc_min && ev.can_discharge(cfg.n_max_switches)) {
        return false;
    }
    let t_re = ev.remaining_slots(t);
    if t_re <= ev.slots_to_target(cfg.dt_hours) {
        return false;
    }
    // The EV must be able to recover to target afterwards.
    let after = ev.soc + ev.soc_delta(Op::Discharge, cfg.dt_hours);
    if after < 0.0 {
        return false;
    }
    let recharge = ev.slots_to_target_at(after, ev.power_kw(), cfg.dt_hours);
    let restart_ok = ev.current_op() == Op::Charge || ev.ch_transitions + 2 <= cfg.n_max_switches;
    restart_ok && t_re - 1 >= recharge + cfg.urgency_slack_slots
}

/// Slots to spare: remaining parking time minus the charge time still needed.
/// Negative once the target is out of reach.
pub fn laxity(ev: &EvState, t: usize, cfg: &FleetConfig) -> i64 {
    let need = i64::try_from(ev.slots_to_target(cfg.dt_hours)).unwrap_or(i64::MAX / 2);
    ev.remaining_slots(t) as i64 - need
}

/// Which EVs charge at slot `t`, before any cost trade-off is made.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChargePlan {
    /// Charge candidates allowed to charge now.
    pub allowed: Vec<usize>,
    /// Allowed EVs that must charge now.
    pub forced: Vec<usize>,
}

/// Plans the fleet's charging at `t` against `headroom_kw[s]`, the power
/// available to EVs in slot `s`.
///
/// Every pending EV gets one uninterrupted block placed as late as the
/// headroom allows, latest departures first; its start is the EV's
/// priority. EVs that fit nowhere rank first by laxity, and charging EVs
/// are credited the hysteresis. EVs on their last episode go ahead of all
/// of them. The slot is then filled in that order. A paused EV resumes only
/// once its block is due, as the episode it starts cannot be paused again.
pub fn plan_charging(fleet: &[EvState], t: usize, headroom_kw: &[f64], cfg: &FleetConfig) -> ChargePlan {
    let room_at = |s: usize| headroom_kw.get(s).copied().unwrap_or(0.0).max(0.0);
    let pending: Vec<usize> = (0..fleet.len()).filter(|&i| is_charge_candidate(&fleet[i], t, cfg)).collect();
    let last = pending.iter().map(|&i| fleet[i].departure_slot).max().unwrap_or(t).max(t + 1);
    let mut room: Vec<f64> = (t..last).map(room_at).collect();

    let mut start = vec![0i64; fleet.len()];
    let mut queue: Vec<usize> = Vec::new();
    for &i in &pending {
        let ev = &fleet[i];
        if ev.on_last_charge_episode(cfg.n_max_switches) {
            hold(&mut room, 0, ev.slots_to_target(cfg.dt_hours), ev.power_kw());
        } else {
            queue.push(i);
        }
    }
    queue.sort_by_key(|&i| {
        let ev = &fleet[i];
        (std::cmp::Reverse(ev.departure_slot), std::cmp::Reverse(ev.slots_to_target(cfg.dt_hours)), i)
    });
    for i in queue {
        let ev = &fleet[i];
        let need = ev.slots_to_target(cfg.dt_hours);
        let span = ev.remaining_slots(t);
        let fits = |s: usize| room[s..s + need].iter().all(|r| *r + 1e-9 >= ev.power_kw());
        let latest = if need <= span { (0..=span - need).rev().find(|&s| fits(s)) } else { None };
        match latest {
            Some(s) => {
                hold(&mut room, s, need, ev.power_kw());
                start[i] = s as i64;
            }
            None => {
                hold(&mut room, 0, need.min(span), ev.power_kw());
                start[i] = laxity(ev, t, cfg) - UNPLACED_RANK;
            }
        }
    }

    let mut plan = ChargePlan::default();
    let mut order: Vec<(bool, i64, usize, usize)> = Vec::new();
    for &i in &pending {
        let ev = &fleet[i];
        let locked = ev.on_last_charge_episode(cfg.n_max_switches);
        if ev.next_charge_is_last(cfg.n_max_switches) && start[i] > cfg.final_start_lead_slots {
            continue;
        }
        plan.allowed.push(i);
        let credit = if ev.current_op() == Op::Charge { cfg.charge_hysteresis_slots } else { 0 };
        order.push((!locked, start[i] - credit, ev.departure_slot, i));
    }
    order.sort_unstable();
    let mut left = room_at(t);
    for (_, _, _, i) in order {
        let p = fleet[i].power_kw();
        if p <= left + 1e-9 {
            left -= p;
            plan.forced.push(i);
        }
    }
    plan.forced.sort_unstable();
    plan
}

/// Offset that ranks EVs with no feasible block ahead of every placed one.
const UNPLACED_RANK: i64 = 10_000;

fn hold(room: &mut [f64], start: usize, len: usize, kw: f64) {
    for r in room.iter_mut().skip(start).take(len) {
        *r -= kw;
    }
}

pub fn classify_candidates(fleet: &[EvState], t: usize, cfg: &FleetConfig) -> Candidates {
    let mut c = Candidates::default();
    for (i, ev) in fleet.iter().enumerate() {
        if is_charge_candidate(ev, t, cfg) {
            c.charge.push(i);
        }
        if is_discharge_candidate(ev, t, cfg) {
            c.discharge.push(i);
        }
    }
    c
}
