use serde::{Deserialize, Serialize};

use crate::fleet::Op;
use crate::powerflow::{dispatch, grid_draw, slot_cost, SlotDispatch, BALANCE_TOL_KW};
use crate::tariff::TariffSchedule;
use crate::SLOTS_PER_DAY;

use super::SchedulerConfig;

/// Per-slot inputs shared by every genome evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SlotContext<'a> {
    pub t: usize,
    pub load_kw: f64,
    pub pv_kw: f64,
    /// Active discharge cap.
    pub cap_kw: f64,
    pub dt_hours: f64,
    pub target_soc: f64,
    pub tariff: &'a TariffSchedule,
}

/// One candidate EV as seen by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gene {
    pub fleet_index: usize,
    pub id: usize,
    pub power_kw: f64,
    pub soc: f64,
    pub target: f64,
    /// Remaining parking slots T_re(t).
    pub t_re: usize,
    /// Slots to spare beyond the minimum charge time.
    pub slack: usize,
    /// Legal operations, always including the first entry as the default.
    pub alleles: Vec<Op>,
    pub must_charge: bool,
    /// What idling this EV would waste: 0 when it is not charging now, 1 when
    /// it is charging and could restart later, 2 when it is charging on its
    /// last permitted episode.
    pub stop_cost: u8,
}

impl Gene {
    pub fn soc_gap(&self) -> f64 {
        self.target - self.soc
    }
}

/// The five raw objective values, all minimized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    /// Operating cost, USD.
    pub cost: f64,
    /// Grid purchases minus PV use, kW.
    pub grid_minus_pv: f64,
    /// Sum of T_re over charging EVs minus over discharging EVs, slots.
    pub time_priority: f64,
    /// Sum of -gap^2 over charging EVs plus gap^2 over discharging EVs.
    pub soc_gap_priority: f64,
    /// Minus total charging and discharging power, kW.
    pub utilization: f64,
}

impl Objectives {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.cost,
            self.grid_minus_pv,
            self.time_priority,
            self.soc_gap_priority,
            self.utilization,
        ]
    }
}

pub fn totals(ops: &[Op], genes: &[Gene]) -> (f64, f64) {
    let mut ch = 0.0;
    let mut dch = 0.0;
    for (op, g) in ops.iter().zip(genes) {
        match op {
            Op::Charge => ch += g.power_kw,
            Op::Discharge => dch += g.power_kw,
            Op::Idle => {}
        }
    }
    (ch, dch)
}

/// Raw objectives for one assignment (`ops[i]` applies to `genes[i]`).
pub fn objective_components(ops: &[Op], genes: &[Gene], ctx: &SlotContext) -> (Objectives, SlotDispatch) {
    let (ch, dch) = totals(ops, genes);
    let d = dispatch(ctx.load_kw, ctx.pv_kw, ch, dch);
    let mut time_priority = 0.0;
    let mut soc_gap_priority = 0.0;
    for (op, g) in ops.iter().zip(genes) {
        let gap2 = g.soc_gap() * g.soc_gap();
        match op {
            Op::Charge => {
                time_priority += g.t_re as f64;
                soc_gap_priority -= gap2;
            }
            Op::Discharge => {
                time_priority -= g.t_re as f64;
                soc_gap_priority += gap2;
            }
            Op::Idle => {}
        }
    }
    let obj = Objectives {
        cost: slot_cost(&d, ctx.tariff, ctx.t, ctx.dt_hours),
        grid_minus_pv: (d.pw_grid_load + d.pw_grid_ev) - (d.pw_pv_load + d.pw_pv_ev),
        time_priority,
        soc_gap_priority,
        utilization: -(ch + dch),
    };
    (obj, d)
}

/// Per-objective normalization: cost by the largest cost a slot can incur
/// at the grid cap, powers by the grid cap, times by a day of slots, SOC
/// terms by target squared.
pub fn scales(ctx: &SlotContext, cfg: &SchedulerConfig) -> [f64; 5] {
    let price = ctx.tariff.max_purchase_price().max(ctx.tariff.max_selling_price());
    let pw = cfg.pw_max.max(1.0);
    [
        (ctx.dt_hours * price * pw).max(1e-9),
        pw,
        SLOTS_PER_DAY as f64,
        (ctx.target_soc * ctx.target_soc).max(1.0),
        pw,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub objectives: Objectives,
    pub dispatch: SlotDispatch,
    pub feasible: bool,
}

pub fn is_feasible(d: &SlotDispatch, ctx: &SlotContext, cfg: &SchedulerConfig) -> bool {
    d.ev_discharge_total <= ctx.cap_kw + BALANCE_TOL_KW
        && d.ev_discharge_total <= d.pw_load + d.ev_charge_total + BALANCE_TOL_KW
        && grid_draw(d) <= cfg.pw_max + BALANCE_TOL_KW
}

/// Scalarized fitness (lower is better) of one assignment.
pub fn evaluate(ops: &[Op], genes: &[Gene], ctx: &SlotContext, cfg: &SchedulerConfig) -> Evaluation {
    let (objectives, d) = objective_components(ops, genes, ctx);
    let s = scales(ctx, cfg);
    let fitness = objectives
        .as_array()
        .iter()
        .zip(cfg.weights)
        .zip(s)
        .map(|((v, w), s)| w * v / s)
        .sum();
    Evaluation {
        fitness,
        objectives,
        feasible: is_feasible(&d, ctx, cfg),
        dispatch: d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gene(id: usize, soc: f64, t_re: usize, alleles: Vec<Op>) -> Gene {
        Gene {
            fleet_index: id,
            id,
            power_kw: 7.0,
            soc,
            target: 80.0,
            t_re,
            slack: t_re,
            alleles,
            must_charge: false,
            stop_cost: 0,
        }
    }

    fn ctx(tariff: &TariffSchedule) -> SlotContext<'_> {
        SlotContext {
            t: 44,
            load_kw: 60.0,
            pv_kw: 25.0,
            cap_kw: 12.0,
            dt_hours: 0.25,
            target_soc: 80.0,
            tariff,
        }
    }

    #[test]
    fn all_idle_components() {
        let tariff = TariffSchedule::default();
        let c = ctx(&tariff);
        let genes = vec![gene(0, 30.0, 20, vec![Op::Idle, Op::Charge])];
        let (obj, d) = objective_components(&[Op::Idle], &genes, &c);
        let sell = tariff.selling_price(44);
        assert!((obj.cost - -(sell * 25.0 * 0.25)).abs() < 1e-12);
        assert_eq!(obj.grid_minus_pv, d.pw_grid_load - d.pw_pv_load);
        assert_eq!((obj.time_priority, obj.soc_gap_priority, obj.utilization), (0.0, 0.0, 0.0));
    }

    #[test]
    fn soc_gap_term_for_charging() {
        let tariff = TariffSchedule::default();
        let genes = vec![gene(0, 20.0, 20, vec![Op::Idle, Op::Charge])];
        let (obj, _) = objective_components(&[Op::Charge], &genes, &ctx(&tariff));
        assert_eq!(obj.soc_gap_priority, -3600.0);
        assert_eq!(obj.time_priority, 20.0);
        assert_eq!(obj.utilization, -7.0);
    }

    #[test]
    fn utilization_term_for_discharging() {
        let tariff = TariffSchedule::default();
        let genes = vec![gene(0, 70.0, 40, vec![Op::Idle, Op::Discharge])];
        let (obj, d) = objective_components(&[Op::Discharge], &genes, &ctx(&tariff));
        assert_eq!(obj.utilization, -7.0);
        assert_eq!(obj.time_priority, -40.0);
        assert_eq!(obj.soc_gap_priority, 100.0);
        assert_eq!(d.pw_ev_load, 7.0);
    }

    #[test]
    fn larger_gap_never_lowers_charge_priority() {
        let tariff = TariffSchedule::default();
        let c = ctx(&tariff);
        for (lo, hi) in [(70.0, 20.0), (79.0, 78.0), (50.0, 10.0)] {
            let a = vec![gene(0, lo, 10, vec![Op::Charge])];
            let b = vec![gene(0, hi, 10, vec![Op::Charge])];
            let (oa, _) = objective_components(&[Op::Charge], &a, &c);
            let (ob, _) = objective_components(&[Op::Charge], &b, &c);
            assert!(ob.soc_gap_priority <= oa.soc_gap_priority);
        }
    }

    #[test]
    fn feasibility_checks_cap_and_grid() {
        let tariff = TariffSchedule::default();
        let cfg = SchedulerConfig::default();
        let c = ctx(&tariff);
        let genes: Vec<_> = (0..2).map(|i| gene(i, 70.0, 40, vec![Op::Idle, Op::Discharge])).collect();
        assert!(evaluate(&[Op::Discharge, Op::Idle], &genes, &c, &cfg).feasible);
        assert!(!evaluate(&[Op::Discharge, Op::Discharge], &genes, &c, &cfg).feasible);
        let heavy = SlotContext { load_kw: 155.0, pv_kw: 0.0, ..c };
        let genes = vec![gene(0, 30.0, 40, vec![Op::Idle, Op::Charge])];
        assert!(!evaluate(&[Op::Charge], &genes, &heavy, &cfg).feasible);
        assert!(evaluate(&[Op::Idle], &genes, &heavy, &cfg).feasible);
    }
}
