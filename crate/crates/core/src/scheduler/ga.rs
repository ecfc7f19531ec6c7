use std::cmp::{Ordering, Reverse};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fleet::Op;
use crate::powerflow::{dispatch, grid_draw, BALANCE_TOL_KW};

use super::objective::{evaluate, totals, Evaluation, Gene, SlotContext};
use super::{ScheduleDecision, SchedulerConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-gene mutation probability.
    pub mutation_prob: f64,
    pub tournament_size: usize,
    pub elitism: usize,
}

impl GaConfig {
    /// 500 individuals, 100 generations, crossover 0.8, mutation 0.01.
    pub fn full() -> Self {
        GaConfig {
            population: 500,
            generations: 100,
            crossover_prob: 0.8,
            mutation_prob: 0.01,
            tournament_size: 3,
            elitism: 1,
        }
    }

    /// Smaller population and fewer generations for desk-scale runs.
    pub fn desk() -> Self {
        GaConfig {
            population: 100,
            generations: 40,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || self.tournament_size == 0 || self.elitism >= self.population {
            return Err(Error::config("GA needs population >= 2, tournament >= 1, elitism < population"));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) || !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::config("GA probabilities must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Flips genes to idle until the assignment satisfies the discharge cap,
/// keeps discharge within demand and respects the grid cap. Discharges go
/// first, largest remaining time first; then optional charges, smallest SOC
/// gap first; must-charge EVs go last, largest slack first, with EVs on
/// their final charging episode kept longest. Returns whether the result is feasible.
pub fn repair(ops: &mut [Op], genes: &[Gene], ctx: &SlotContext, cfg: &SchedulerConfig) -> bool {
    loop {
        let (ch, dch) = totals(ops, genes);
        if dch > ctx.cap_kw + BALANCE_TOL_KW || dch > ctx.load_kw + ch + BALANCE_TOL_KW {
            let victim = (0..ops.len())
                .filter(|&i| ops[i] == Op::Discharge)
                .max_by_key(|&i| (genes[i].t_re, genes[i].id))
                .expect("discharge total is positive");
            ops[victim] = Op::Idle;
            continue;
        }
        let d = dispatch(ctx.load_kw, ctx.pv_kw, ch, dch);
        if grid_draw(&d) <= cfg.pw_max + BALANCE_TOL_KW {
            return true;
        }
        let optional = (0..ops.len())
            .filter(|&i| ops[i] == Op::Charge && !genes[i].must_charge)
            .min_by(|&a, &b| {
                genes[a]
                    .soc_gap()
                    .total_cmp(&genes[b].soc_gap())
                    .then(genes[b].id.cmp(&genes[a].id))
            });
        let victim = optional.or_else(|| {
            (0..ops.len()).filter(|&i| ops[i] == Op::Charge).min_by_key(|&i| {
                let g = &genes[i];
                (g.stop_cost >= 2, Reverse(g.slack), g.stop_cost, Reverse(g.id))
            })
        });
        match victim {
            Some(i) => ops[i] = Op::Idle,
            None => return false,
        }
    }
}

#[derive(Clone)]
struct Individual {
    ops: Vec<Op>,
    eval: Evaluation,
}

/// Feasible first, then fitness, then the lexicographically smallest genome
/// in EV order.
fn better(a: &Individual, b: &Individual) -> Ordering {
    b.eval
        .feasible
        .cmp(&a.eval.feasible)
        .then(a.eval.fitness.total_cmp(&b.eval.fitness))
        .then_with(|| a.ops.cmp(&b.ops))
}

fn random_allele(gene: &Gene, rng: &mut ChaCha8Rng) -> Op {
    *gene.alleles.choose(rng).expect("every gene has an allele")
}

/// Runs the GA over one slot's candidates. Deterministic for a given seed;
/// evaluation order does not affect the result.
pub fn optimize_slot(genes: &[Gene], ctx: &SlotContext, cfg: &SchedulerConfig, seed: u64) -> ScheduleDecision {
    let build = |ops: Vec<Op>| {
        let eval = evaluate(&ops, genes, ctx, cfg);
        Individual { ops, eval }
    };
    let fix = |mut ops: Vec<Op>| {
        repair(&mut ops, genes, ctx, cfg);
        ops
    };

    let best = if genes.is_empty() {
        build(Vec::new())
    } else {
        let ga = &cfg.ga;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw: Vec<Vec<Op>> = Vec::with_capacity(ga.population);
        raw.push(genes.iter().map(|g| g.alleles[0]).collect());
        while raw.len() < ga.population {
            raw.push(genes.iter().map(|g| random_allele(g, &mut rng)).collect());
        }
        let mut pop: Vec<Individual> = raw.into_par_iter().map(|ops| build(fix(ops))).collect();
        let mut best = pop.iter().min_by(|a, b| better(a, b)).cloned().expect("non-empty");

        for _ in 0..ga.generations {
            pop.sort_by(better);
            let n_elite = ga.elitism.min(pop.len());
            let tournament = |rng: &mut ChaCha8Rng| -> usize {
                (0..ga.tournament_size)
                    .map(|_| rng.gen_range(0..pop.len()))
                    .min_by(|&a, &b| better(&pop[a], &pop[b]))
                    .expect("tournament size >= 1")
            };
            let mut children = Vec::with_capacity(ga.population);
            while n_elite + children.len() < ga.population {
                let mut a = pop[tournament(&mut rng)].ops.clone();
                let mut b = pop[tournament(&mut rng)].ops.clone();
                if rng.gen_bool(ga.crossover_prob) {
                    for i in 0..a.len() {
                        if rng.gen_bool(0.5) {
                            std::mem::swap(&mut a[i], &mut b[i]);
                        }
                    }
                }
                for child in [&mut a, &mut b] {
                    for (op, gene) in child.iter_mut().zip(genes) {
                        if gene.alleles.len() > 1 && rng.gen_bool(ga.mutation_prob) {
                            let others: Vec<Op> = gene.alleles.iter().copied().filter(|x| x != op).collect();
                            *op = *others.choose(&mut rng).unwrap_or(op);
                        }
                    }
                }
                children.push(a);
                if n_elite + children.len() < ga.population {
                    children.push(b);
                }
            }
            pop.truncate(n_elite);
            pop.extend(children.into_par_iter().map(|ops| build(fix(ops))).collect::<Vec<_>>());
            if let Some(gen_best) = pop.iter().min_by(|a, b| better(a, b)) {
                if better(gen_best, &best) == Ordering::Less {
                    best = gen_best.clone();
                }
            }
        }
        best
    };

    ScheduleDecision {
        ops: genes.iter().zip(&best.ops).map(|(g, op)| (g.fleet_index, *op)).collect(),
        dispatch: best.eval.dispatch,
        fitness: best.eval.fitness,
        objectives: best.eval.objectives,
        feasible: best.eval.feasible,
    }
}
