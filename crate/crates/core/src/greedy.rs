//! Greedy slot-by-slot construction of threshold policies.
//!
//! Each iteration extends one class's threshold by a full sub-slot, choosing
//! the class with the best marginal delivery gain (or gain per unit of
//! transmission energy), until no class can afford another sub-slot.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::gridsearch::{snap, solve_boundary, Boundary, Budget};
use crate::model::{ProfileCost, Scenario, ThresholdEvaluator, ThresholdPolicy};
use crate::roots::{newton_bisect, RootError};

/// Guarantee of the better of the two variants without beaconing: (1 - 1/e) / 2.
pub const COMBINED_CERTIFICATE: f64 = 0.5 * (1.0 - 1.0 / std::f64::consts::E);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyVariant {
    /// Largest marginal delivery gain.
    Gain,
    /// Largest marginal gain per unit of transmission energy.
    GainPerCost,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreedyError {
    #[error("{0:?} greedy assumes no beaconing costs, but some technology has beacon_cost > 0")]
    BeaconingPresent(GreedyVariant),
    #[error(transparent)]
    Root(#[from] RootError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyOptions {
    /// After the integer phase, give the best class the fraction of a
    /// sub-slot that the leftover budget still buys.
    pub top_up: bool,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self { top_up: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TopUp {
    pub class: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GreedyReport {
    pub variant: GreedyVariant,
    pub policy: ThresholdPolicy,
    pub objective: f64,
    pub energy: f64,
    /// Objective of the integer policy before any top-up.
    pub integer_objective: f64,
    /// Sub-slots awarded.
    pub iterations: usize,
    /// Leading iterations that coincide with the unconstrained greedy choice.
    pub certified_iterations: usize,
    pub cardinality_cap: usize,
    pub online_bound: f64,
    pub offline_bound: f64,
    pub top_up: Option<TopUp>,
    pub wall_time: f64,
}

fn free_profile(sc: &Scenario) -> Vec<f64> {
    let h_max = sc.max_threshold();
    (0..sc.num_classes())
        .map(|c| if sc.is_free(c) { h_max } else { 0.0 })
        .collect()
}

fn budget_of(sc: &Scenario) -> Budget {
    Budget::new(sc.budget(), sc.feasibility_tolerance())
}

/// Largest number of full sub-slots, over the classes that cost anything,
/// that an affordable integer threshold policy can hold.
///
/// Energy is at least `min_c g_c(T)` for `T` total sub-slots, where
/// `g_c(x) = rho_c N_c (1 - e^{-a_c x}) + x b_c / |C_w|` is concave with
/// `g_c(0) = 0`, so the cap is `max_c g_c^{-1}(budget)`, at most the number
/// of sub-slots available.
pub fn cardinality_cap(sc: &Scenario) -> Result<usize, RootError> {
    let cost = ProfileCost::new(sc);
    let h_max = sc.max_threshold() as usize;
    let active: Vec<usize> = (0..sc.num_classes()).filter(|&c| !sc.is_free(c)).collect();
    let slots = active.len() * h_max;
    let budget = sc.budget();
    let mut best = 0.0f64;
    for &c in &active {
        let w = cost.tx_weight(c);
        let a = cost.rate_dt(c);
        let tech = cost.technology_of(c);
        let b = cost.beacon_per_sub_slot(tech) / cost.members(tech).len() as f64;
        let x = if b == 0.0 {
            if budget >= w {
                return Ok(slots);
            }
            -(-budget / w).ln_1p() / a
        } else {
            let g = |x: f64| {
                (
                    w * -(-a * x).exp_m1() + b * x - budget,
                    w * a * (-a * x).exp() + b,
                )
            };
            newton_bisect(g, 0.0, budget / b, 0.0, 1e-12 * budget.max(1.0))?
        };
        best = best.max(x);
    }
    Ok((snap(best).floor() as usize).min(slots))
}

/// Sub-slots class `c` can afford when every other class transmits throughout.
pub fn min_slots(c: usize, sc: &Scenario) -> Result<usize, RootError> {
    let h_max = sc.max_threshold();
    let mut profile = vec![h_max; sc.num_classes()];
    let s = match solve_boundary(&ProfileCost::new(sc), budget_of(sc), c, &mut profile)? {
        Boundary::Exact(r) => snap(r).floor(),
        Boundary::Unbounded => h_max,
        Boundary::BudgetExceeded => 0.0,
    };
    Ok(s as usize)
}

struct State<'a> {
    ev: &'a ThresholdEvaluator,
    h: Vec<usize>,
    log_miss: f64,
    energy: f64,
}

impl State<'_> {
    /// Energy after one more sub-slot for class `c`.
    fn energy_with_next(&self, c: usize) -> f64 {
        let cost = self.ev.cost();
        let w = cost.technology_of(c);
        let top = cost
            .members(w)
            .iter()
            .map(|&o| self.h[o])
            .max()
            .unwrap_or(0);
        let beacon = if self.h[c] == top {
            cost.beacon_per_sub_slot(w)
        } else {
            0.0
        };
        self.energy + cost.next_slot_tx_cost(c, self.h[c]) + beacon
    }

    fn gain(&self, c: usize) -> f64 {
        let d = self.ev.log_miss_int(c, self.h[c] + 1) - self.ev.log_miss_int(c, self.h[c]);
        self.log_miss.exp() * -d.exp_m1()
    }

    fn score(&self, c: usize, variant: GreedyVariant) -> f64 {
        let delta = self.gain(c);
        match variant {
            GreedyVariant::Gain => delta,
            GreedyVariant::GainPerCost => {
                let psi = self.ev.cost().next_slot_tx_cost(c, self.h[c]);
                if psi > 0.0 {
                    delta / psi
                } else if delta > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    fn award(&mut self, c: usize, new_energy: f64) {
        self.log_miss +=
            self.ev.log_miss_int(c, self.h[c] + 1) - self.ev.log_miss_int(c, self.h[c]);
        self.h[c] += 1;
        self.energy = new_energy;
    }
}

/// Strictly greater wins, so the lowest index keeps ties.
fn argmax(it: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (c, s) in it {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best.map(|(c, _)| c)
}

pub fn greedy_construct(
    sc: &Scenario,
    variant: GreedyVariant,
) -> Result<GreedyReport, GreedyError> {
    greedy_construct_with(sc, variant, &GreedyOptions::default())
}

pub fn greedy_construct_with(
    sc: &Scenario,
    variant: GreedyVariant,
    opts: &GreedyOptions,
) -> Result<GreedyReport, GreedyError> {
    if variant == GreedyVariant::GainPerCost && sc.has_beaconing() {
        return Err(GreedyError::BeaconingPresent(variant));
    }
    let start = Instant::now();
    let ev = ThresholdEvaluator::new(sc);
    let h_max = sc.max_threshold() as usize;
    let limit = sc.budget() + sc.feasibility_tolerance();
    let base = free_profile(sc);
    let active: Vec<usize> = (0..sc.num_classes()).filter(|&c| !sc.is_free(c)).collect();

    let h: Vec<usize> = base.iter().map(|&x| x as usize).collect();
    let mut st = State {
        ev: &ev,
        log_miss: h
            .iter()
            .enumerate()
            .map(|(c, &m)| ev.log_miss_int(c, m))
            .sum(),
        energy: ev.energy(&base),
        h,
    };
    let mut iterations = 0;
    let mut certified = 0;
    let mut deviated = false;
    loop {
        let open = active.iter().copied().filter(|&c| st.h[c] < h_max);
        let scored: Vec<(usize, f64, f64)> = open
            .map(|c| (c, st.score(c, variant), st.energy_with_next(c)))
            .collect();
        let pick = argmax(scored.iter().filter(|s| s.2 <= limit).map(|s| (s.0, s.1)));
        let Some(pick) = pick else { break };
        if !deviated {
            let free_pick = argmax(scored.iter().map(|s| (s.0, s.1)));
            if free_pick == Some(pick) {
                certified += 1;
            } else {
                deviated = true;
            }
        }
        let e = scored.iter().find(|s| s.0 == pick).unwrap().2;
        st.award(pick, e);
        iterations += 1;
    }

    let mut thresholds: Vec<f64> = st.h.iter().map(|&m| m as f64).collect();
    let integer_objective = ev.delivery(&thresholds);
    let mut top_up = None;
    if opts.top_up {
        let budget = budget_of(sc);
        let mut best = (integer_objective, None);
        for &c in &active {
            if st.h[c] >= h_max {
                continue;
            }
            let mut p = thresholds.clone();
            let Some(r) = solve_boundary(ev.cost(), budget, c, &mut p)?.clamped(h_max as f64)
            else {
                continue;
            };
            p[c] = r.min(st.h[c] as f64 + 1.0).max(st.h[c] as f64);
            let f = ev.delivery(&p);
            if f > best.0 {
                best = (f, Some((c, p[c])));
            }
        }
        if let (_, Some((class, threshold))) = best {
            thresholds[class] = threshold;
            top_up = Some(TopUp { class, threshold });
        }
    }

    let cap = cardinality_cap(sc)?;
    let total_min: usize = active
        .iter()
        .map(|&c| min_slots(c, sc))
        .sum::<Result<usize, _>>()?;
    let bound = |l: usize| {
        if cap == 0 {
            0.0
        } else {
            -(-(l as f64) / cap as f64).exp_m1()
        }
    };
    Ok(GreedyReport {
        variant,
        objective: ev.delivery(&thresholds),
        energy: ev.energy(&thresholds),
        policy: ThresholdPolicy::new(thresholds),
        integer_objective,
        iterations,
        certified_iterations: certified,
        cardinality_cap: cap,
        online_bound: bound(certified),
        offline_bound: bound(total_min),
        top_up,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Runs both variants and keeps the better objective (the gain variant on ties).
/// Only defined without beaconing; the result carries [`COMBINED_CERTIFICATE`].
pub fn combined_best(sc: &Scenario) -> Result<GreedyReport, GreedyError> {
    combined_best_with(sc, &GreedyOptions::default())
}

pub fn combined_best_with(
    sc: &Scenario,
    opts: &GreedyOptions,
) -> Result<GreedyReport, GreedyError> {
    if sc.has_beaconing() {
        return Err(GreedyError::BeaconingPresent(GreedyVariant::GainPerCost));
    }
    let a = greedy_construct_with(sc, GreedyVariant::Gain, opts)?;
    let b = greedy_construct_with(sc, GreedyVariant::GainPerCost, opts)?;
    Ok(if b.objective > a.objective { b } else { a })
}
