//! Helpers shared by the integration tests.
#![allow(dead_code)]

use evcs::config::SimConfig;
use evcs::fleet::{Op, EvState};
use evcs::forecast::{train_pair, ModelShape, TrainConfig};
use evcs::harness::{synth_history, DayResult, Forecasters, SYNTH_PV_CAPACITY_KW};
use evcs::powerflow::grid_draw;
use evcs::scheduler::{evaluate, Gene, SchedulerConfig, SlotContext};

/// Small, quickly trained forecasters; good enough to drive the proposed cap.
pub fn quick_forecasters() -> Forecasters {
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 16,
        shape: ModelShape {
            gru_layers: 1,
            hidden: 6,
            fc_widths: vec![8],
            ..ModelShape::default()
        },
        ..TrainConfig::desk()
    };
    let (load, pv) = synth_history(7, 4, SYNTH_PV_CAPACITY_KW);
    let (l, p) = train_pair(&load, &pv, &cfg, 7).expect("training succeeds");
    Forecasters { load: l.model, pv: p.model }
}

/// Re-derives every slot and EV constraint from a day's records alone and
/// returns a description of each breach.
pub fn audit(r: &DayResult, cfg: &SimConfig) -> Vec<String> {
    let mut out = Vec::new();
    let tol = 1e-9;
    for s in &r.slots {
        let d = &s.dispatch;
        let t = s.t;
        for (name, x) in [
            ("grid_load", d.pw_grid_load),
            ("grid_ev", d.pw_grid_ev),
            ("pv_load", d.pw_pv_load),
            ("pv_ev", d.pw_pv_ev),
            ("ev_load", d.pw_ev_load),
            ("ev_ev", d.pw_ev_ev),
        ] {
            if x < -tol {
                out.push(format!("slot {t}: {name} = {x}"));
            }
        }
        if (d.pw_grid_load + d.pw_pv_load + d.pw_ev_load - d.pw_load).abs() > tol {
            out.push(format!("slot {t}: load balance"));
        }
        if (d.pw_grid_ev + d.pw_pv_ev + d.pw_ev_ev - d.ev_charge_total).abs() > tol {
            out.push(format!("slot {t}: charging balance"));
        }
        if (d.pw_ev_load + d.pw_ev_ev - d.ev_discharge_total).abs() > tol {
            out.push(format!("slot {t}: discharge balance"));
        }
        if d.pw_pv_load + d.pw_pv_ev > d.pw_pv_avail + tol {
            out.push(format!("slot {t}: PV overuse"));
        }
        if d.ev_discharge_total > s.cap_kw + tol {
            out.push(format!("slot {t}: discharge {} above cap {}", d.ev_discharge_total, s.cap_kw));
        }
        let net = d.pw_load + d.ev_charge_total - d.pw_pv_load - d.pw_pv_ev - d.ev_discharge_total;
        if net > cfg.scheduler.pw_max + tol {
            out.push(format!("slot {t}: grid {net} above {}", cfg.scheduler.pw_max));
        }
        if (net - grid_draw(d)).abs() > tol {
            out.push(format!("slot {t}: grid draw mismatch"));
        }
    }

    let mut by_ev: std::collections::BTreeMap<usize, Vec<Op>> = Default::default();
    for e in &r.ev_log {
        if e.op == Op::Discharge && e.soc_before <= cfg.fleet.soc_min {
            out.push(format!("slot {}: EV {} discharged at {}", e.t, e.id, e.soc_before));
        }
        if e.op == Op::Charge && e.soc_before >= cfg.fleet.target_soc {
            out.push(format!("slot {}: EV {} charged at {}", e.t, e.id, e.soc_before));
        }
        by_ev.entry(e.id).or_default().push(e.op);
    }
    for (id, ops) in by_ev {
        for op in [Op::Charge, Op::Discharge] {
            let on: Vec<bool> = ops.iter().map(|o| *o == op).collect();
            let edges = on.iter().fold((false, 0u32), |(prev, n), &x| (x, n + u32::from(x != prev))).1;
            if edges > cfg.fleet.n_max_switches {
                out.push(format!("EV {id}: {edges} {} transitions", op.as_str()));
            }
        }
    }
    out
}

/// Every legal assignment of the genes' alleles, in lexicographic order.
pub fn all_assignments(genes: &[Gene]) -> Vec<Vec<Op>> {
    let mut acc: Vec<Vec<Op>> = vec![Vec::new()];
    for g in genes {
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                g.alleles.iter().map(move |op| {
                    let mut v = prefix.clone();
                    v.push(*op);
                    v
                })
            })
            .collect();
    }
    acc
}

/// Exhaustive best feasible fitness and its assignment.
pub fn brute_force(genes: &[Gene], ctx: &SlotContext, cfg: &SchedulerConfig) -> Option<(f64, Vec<Op>)> {
    all_assignments(genes)
        .into_iter()
        .map(|ops| (evaluate(&ops, genes, ctx, cfg), ops))
        .filter(|(e, _)| e.feasible)
        .map(|(e, ops)| (e.fitness, ops))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// A gene built from an EV, offering `alleles`.
pub fn gene_of(ev: &EvState, t: usize, dt: f64, fleet_index: usize, alleles: Vec<Op>) -> Gene {
    let t_re = ev.remaining_slots(t);
    Gene {
        fleet_index,
        id: ev.id,
        power_kw: ev.power_kw(),
        soc: ev.soc,
        target: ev.target,
        t_re,
        slack: t_re.saturating_sub(ev.slots_to_target(dt)),
        alleles,
        must_charge: false,
        stop_cost: 0,
    }
}

/// |a - b| within `rel` of |b|, with a tiny absolute floor for b near 0.
pub fn within(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-9)
}

use evcs::fleet::FleetConfig;
use evcs::scheduler::optimize_slot;
use evcs::tariff::TariffSchedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative fitness tolerance for GA-versus-exhaustive comparisons.
pub const GA_REL_TOL: f64 = 0.05;

/// Random three-EV, one-slot instances. Returns, per instance, the GA's
/// fitness and the exhaustive optimum.
pub fn single_slot_instances(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let tariff = TariffSchedule::default();
    let cfg = SchedulerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let genes: Vec<Gene> = (0..3)
            .map(|i| {
                let t_re = rng.gen_range(4..60);
                Gene {
                    fleet_index: i,
                    id: i,
                    power_kw: if rng.gen_bool(0.7) { 7.0 } else { 19.2 },
                    soc: rng.gen_range(21.0..79.0),
                    target: 80.0,
                    t_re,
                    slack: rng.gen_range(0..t_re),
                    alleles: vec![Op::Idle, Op::Charge, Op::Discharge],
                    must_charge: false,
                    stop_cost: 0,
                }
            })
            .collect();
        let ctx = SlotContext {
            t: rng.gen_range(0..96),
            load_kw: rng.gen_range(10.0..140.0),
            pv_kw: rng.gen_range(0.0..90.0),
            cap_kw: if rng.gen_bool(0.5) { 12.0 } else { 40.0 },
            dt_hours: 0.25,
            target_soc: 80.0,
            tariff: &tariff,
        };
        let Some((best, _)) = brute_force(&genes, &ctx, &cfg) else { continue };
        let ga = optimize_slot(&genes, &ctx, &cfg, rng.gen());
        assert!(ga.feasible, "an all-idle assignment is always feasible here");
        out.push((ga.fitness, best));
    }
    out
}

/// Two EVs over two slots. Each slot is decided either by the GA or by
/// exhaustive search, with SOC carried forward; returns the two end costs
/// (GA, exhaustive) in USD.
pub fn two_slot_instance(seed: u64) -> (f64, f64) {
    let tariff = TariffSchedule::default();
    let cfg = SchedulerConfig::default();
    let fcfg = FleetConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fleet: Vec<EvState> = (0..2)
        .map(|i| EvState::new(i, 0, rng.gen_range(60..96), rng.gen_range(30.0..75.0), &fcfg))
        .collect();
    let t0 = rng.gen_range(30..80);
    let load = [rng.gen_range(20.0..120.0), rng.gen_range(20.0..120.0)];
    let pv = [rng.gen_range(0.0..60.0), rng.gen_range(0.0..60.0)];

    let run = |use_ga: bool| -> f64 {
        let mut fleet = fleet.clone();
        let mut cost = 0.0;
        for k in 0..2 {
            let t = t0 + k;
            let genes: Vec<Gene> = fleet
                .iter()
                .enumerate()
                .map(|(i, ev)| {
                    let mut alleles = vec![Op::Idle];
                    if ev.soc < ev.target {
                        alleles.push(Op::Charge);
                    }
                    if ev.soc > ev.soc_min {
                        alleles.push(Op::Discharge);
                    }
                    gene_of(ev, t, 0.25, i, alleles)
                })
                .collect();
            let ctx = SlotContext {
                t,
                load_kw: load[k],
                pv_kw: pv[k],
                cap_kw: 12.0,
                dt_hours: 0.25,
                target_soc: 80.0,
                tariff: &tariff,
            };
            let ops = if use_ga {
                let d = optimize_slot(&genes, &ctx, &cfg, seed * 31 + k as u64);
                d.ops.iter().map(|(_, op)| *op).collect()
            } else {
                brute_force(&genes, &ctx, &cfg).expect("idle is feasible").1
            };
            cost += evaluate(&ops, &genes, &ctx, &cfg).objectives.cost;
            for (ev, op) in fleet.iter_mut().zip(&ops) {
                ev.step_soc(*op, 0.25).expect("legal op");
            }
        }
        cost
    };
    (run(true), run(false))
}
