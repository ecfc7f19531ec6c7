//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary under `cargo test`. The process exits nonzero on
//! a FAIL only when `EVCS_ACCEPTANCE_STRICT` is set, so the gate can block
//! CI without hiding results from an ordinary test run.

mod common;

use std::time::{Duration, Instant};

use common::{audit, single_slot_instances, two_slot_instance, within, GA_REL_TOL};
use evcs::config::SimConfig;
use evcs::forecast::{grad_check, train, ForecastModel, ModelShape, TrainConfig, INPUT_LEN, OUTPUT_LEN};
use evcs::harness::{prepare_forecasters, run_day, DayResult};
use evcs::scheduler::{discharge_cap_conventional, discharge_cap_proposed, Scheme, SchedulerConfig};
use evcs::tariff::TariffSchedule;
use evcs::slot_of;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 10;
const MAX_RUN: Duration = Duration::from_secs(600);
const MIN_ATTAINMENT: f64 = 0.99;
const GA_MIN_HITS: usize = 18;
const GA_INSTANCES: usize = 20;
const TWO_SLOT_INSTANCES: u64 = 10;
const GRAD_TOL: f64 = 1e-4;
const RMSE_REDUCTION: f64 = 0.5;
const MAX_TRAIN: Duration = Duration::from_secs(120);
const SELL_TOL: f64 = 1e-12;
const K0_INPUTS: usize = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Runs {
    days: Vec<(Scheme, Vec<DayResult>)>,
    slowest: Duration,
    cfg: SimConfig,
}

fn simulate_all() -> Runs {
    let cfg = SimConfig::default();
    let f = prepare_forecasters(&cfg.forecast, &cfg.scenario).expect("forecasters train");
    let mut slowest = Duration::ZERO;
    let days = Scheme::ALL
        .iter()
        .map(|&scheme| {
            let results = (0..SEEDS)
                .map(|seed| {
                    let start = Instant::now();
                    let r = run_day(&cfg, scheme, seed, Some(&f)).expect("day runs");
                    slowest = slowest.max(start.elapsed());
                    r
                })
                .collect();
            (scheme, results)
        })
        .collect();
    Runs { days, slowest, cfg }
}

fn mean_cost(days: &[DayResult]) -> f64 {
    days.iter().map(DayResult::total_cost).sum::<f64>() / days.len() as f64
}

fn criterion_1(runs: &Runs) -> Outcome {
    let m: Vec<f64> = runs.days.iter().map(|(_, d)| mean_cost(d)).collect();
    let (co, conv, prop) = (m[0], m[1], m[2]);
    let ordered = prop < conv && conv < co;
    let negative = conv < 0.0 && prop < 0.0;
    let fast = runs.slowest <= MAX_RUN;
    outcome(
        ordered && negative && fast,
        format!(
            "mean cost USD charge_only {co:.3}, conventional {conv:.3}, proposed {prop:.3}; \
             ordered {ordered}, Ch/Dch negative {negative}; slowest run {:.1} s",
            runs.slowest.as_secs_f64()
        ),
    )
}

fn criterion_2(runs: &Runs) -> Outcome {
    let mut breaches = Vec::new();
    let mut slots = 0;
    for (scheme, days) in &runs.days {
        for d in days {
            slots += d.slots.len();
            breaches.extend(d.violations.iter().map(|v| format!("{scheme} seed {}: {v:?}", d.seed)));
            breaches.extend(audit(d, &runs.cfg).into_iter().map(|b| format!("{scheme} seed {}: {b}", d.seed)));
        }
    }
    let first = breaches.first().cloned().unwrap_or_default();
    outcome(breaches.is_empty(), format!("{slots} slots audited, {} breaches {first}", breaches.len()))
}

fn criterion_3(runs: &Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (scheme, days) in &runs.days {
        let (r, n) = days
            .iter()
            .map(DayResult::target_attainment)
            .fold((0, 0), |(a, b), (r, n)| (a + r, b + n));
        let frac = r as f64 / n.max(1) as f64;
        pass &= frac >= MIN_ATTAINMENT;
        parts.push(format!("{scheme} {r}/{n} ({:.2}%)", 100.0 * frac));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_4() -> Outcome {
    let single = single_slot_instances(GA_INSTANCES, 11);
    let hits = single.iter().filter(|(ga, best)| within(*ga, *best, GA_REL_TOL)).count();
    let two: Vec<(f64, f64)> = (0..TWO_SLOT_INSTANCES).map(two_slot_instance).collect();
    let two_ok = two.iter().filter(|(ga, bf)| (ga - bf).abs() <= GA_REL_TOL * bf.abs() + 1e-9).count();
    outcome(
        hits >= GA_MIN_HITS && two_ok == two.len(),
        format!("3x1: {hits}/{GA_INSTANCES} within 5%; 2x2 end cost: {two_ok}/{} within 5%", two.len()),
    )
}

fn criterion_5() -> Outcome {
    let cfg = SchedulerConfig::default();
    let below = 86.0 - 1e-9;
    let conventional = [
        ((86.0, 0.0), 12.0),
        ((100.0, 14.0), 12.0),
        ((below, 0.0), 2.0),
        ((50.0, 0.0), 2.0),
        ((200.0, 120.0), 2.0),
    ];
    let mut ok = conventional
        .iter()
        .all(|((l, p), cap)| discharge_cap_conventional(*l, *p, &cfg).to_bits() == f64::to_bits(*cap));
    let flat = vec![(86.0, 0.0); 7];
    let mut dipped = flat.clone();
    dipped[3].0 = below;
    let mut lumpy = vec![(40.0, 0.0); 7];
    lumpy[0].0 = 86.0 * 8.0 - 40.0 * 6.0 - 100.0;
    let proposed = [
        ((86.0, 0.0), flat.clone(), 12.0),
        ((86.0, 0.0), dipped, 2.0),
        ((100.0, 0.0), lumpy, 12.0),
        ((300.0, 0.0), vec![(0.0, 0.0); 7], 2.0),
        ((20.0, 0.0), vec![(120.0, 10.0); 7], 12.0),
    ];
    ok &= proposed
        .iter()
        .all(|(now, f, cap)| discharge_cap_proposed(*now, f, &cfg).to_bits() == f64::to_bits(*cap));
    outcome(ok, format!("{} conventional and {} proposed cases, both boundaries included", conventional.len(), proposed.len()))
}

fn tiny_model() -> ForecastModel {
    let shape = ModelShape { gru_layers: 2, hidden: 4, fc_widths: vec![5, 3], ..ModelShape::default() };
    let mut m = ForecastModel::init(shape, 21).expect("valid shape");
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for p in m.params_mut() {
        *p += rng.gen_range(-0.1..0.1);
    }
    m
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let window: Vec<f64> = (0..INPUT_LEN).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let target: Vec<f64> = (0..OUTPUT_LEN).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let err = grad_check(&tiny_model(), &window, &target);

    let series: Vec<f64> = (0..7 * 96).map(|t| 50.0 + 30.0 * (t as f64 * std::f64::consts::TAU / 96.0).sin()).collect();
    let start = Instant::now();
    let out = train(&series, &TrainConfig::desk(), 5).expect("training runs");
    let took = start.elapsed();
    let reduction = 1.0 - out.rmse_valid / out.rmse_valid_initial;
    outcome(
        err < GRAD_TOL && reduction >= RMSE_REDUCTION && took <= MAX_TRAIN,
        format!(
            "grad check max rel err {err:.2e}; sinusoid valid RMSE {:.3} -> {:.3} kW ({:.1}% lower) in {:.1} s",
            out.rmse_valid_initial,
            out.rmse_valid,
            100.0 * reduction,
            took.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let tariff = TariffSchedule::default();
    let (off, mid, on) = (0.055, 0.108, 0.179);
    let cases = [
        (slot_of(23, 30), off),
        (slot_of(10, 30), on),
        (slot_of(9, 0), mid),
        (slot_of(8, 45), off),
        (slot_of(10, 0), on),
        (slot_of(9, 45), mid),
        (slot_of(12, 0), mid),
        (slot_of(11, 45), on),
        (slot_of(13, 0), on),
        (slot_of(12, 45), mid),
        (slot_of(17, 0), mid),
        (slot_of(16, 45), on),
        (slot_of(23, 0), off),
        (slot_of(22, 45), mid),
        (0, off),
    ];
    let prices_ok = cases.iter().all(|(t, p)| tariff.purchase_price(*t) == *p);
    let sell_ok = (0..96).all(|t| (tariff.selling_price(t) - (0.10 + 1.2 * 0.05)).abs() <= SELL_TOL);
    outcome(prices_ok && sell_ok, format!("{} band/boundary slots exact: {prices_ok}; selling price SMP + 1.2 REC: {sell_ok}", cases.len()))
}

fn criterion_8() -> Outcome {
    let mut cfg = SimConfig::default();
    cfg.scheduler.dch_max_hi = 0.0;
    cfg.scheduler.dch_max_lo = 0.0;
    let f = common::quick_forecasters();
    let mut flows = 0.0;
    for scheme in [Scheme::Conventional, Scheme::Proposed] {
        for seed in 0..3 {
            let r = run_day(&cfg, scheme, seed, Some(&f)).expect("day runs");
            flows += r.slots.iter().map(|s| s.dispatch.pw_ev_load + s.dispatch.pw_ev_ev).sum::<f64>();
        }
    }
    let k0 = SchedulerConfig { lookahead_k: 0, ..SchedulerConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let agree = (0..K0_INPUTS)
        .filter(|_| {
            let (l, p) = (rng.gen_range(0.0..250.0), rng.gen_range(0.0..100.0));
            discharge_cap_proposed((l, p), &[], &k0) == discharge_cap_conventional(l, p, &k0)
        })
        .count();
    outcome(
        flows == 0.0 && agree == K0_INPUTS,
        format!("zero-cap discharge flows {flows} kW; K=0 caps agree on {agree}/{K0_INPUTS} inputs"),
    )
}

fn main() {
    let runs = simulate_all();
    let results = [
        ("scheme ordering", criterion_1(&runs)),
        ("constraint suite", criterion_2(&runs)),
        ("target attainment", criterion_3(&runs)),
        ("GA vs brute force", criterion_4()),
        ("cap-rule tables", criterion_5()),
        ("forecaster", criterion_6()),
        ("tariff", criterion_7()),
        ("equivalence degeneracies", criterion_8()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("{} criterion {} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria pass", results.len() - failed, results.len());
    if failed > 0 && std::env::var_os("EVCS_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
