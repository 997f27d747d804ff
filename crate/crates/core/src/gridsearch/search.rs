use std::cmp::Ordering;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering as AtomicOrdering};
use std::time::Instant;

use rayon::prelude::*;

use super::{
    range_from, ratio_bound, snap, solve_boundary, Boundary, Budget, GridOptions, SolveReport,
};
use crate::model::{Scenario, ThresholdEvaluator, ThresholdPolicy};
use crate::roots::RootError;

/// Pruning slack: a leaf is skipped only when even its rounded-up objective
/// trails the incumbent by more than this, so float noise never drops a winner.
const PRUNE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Candidate {
    objective: f64,
    thresholds: Vec<f64>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Higher objective first, then the lexicographically smaller profile.
fn beats(a: &Candidate, b: &Candidate) -> bool {
    match a.objective.total_cmp(&b.objective) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => lex_cmp(&a.thresholds, &b.thresholds) == Ordering::Less,
    }
}

#[derive(Debug, Default)]
struct Local {
    best: Option<Candidate>,
    /// best rounded-up objective, the upper-bound oracle
    ub: f64,
    enumerated: u64,
    error: Option<RootError>,
    profiles: Vec<(usize, Vec<f64>)>,
}

impl Local {
    fn merge(mut self, other: Local) -> Local {
        self.best = match (self.best, other.best) {
            (Some(a), Some(b)) => Some(if beats(&b, &a) { b } else { a }),
            (a, b) => a.or(b),
        };
        self.ub = self.ub.max(other.ub);
        self.enumerated += other.enumerated;
        self.error = self.error.or(other.error);
        self.profiles.extend(other.profiles);
        self
    }
}

struct Search<'a> {
    ev: &'a ThresholdEvaluator,
    budget: Budget,
    h_max: f64,
    base: Vec<f64>,
    active: Vec<usize>,
    deadline: Option<Instant>,
    stop: AtomicBool,
    timed_out: AtomicBool,
    incumbent: AtomicU64,
    collect: bool,
}

impl<'a> Search<'a> {
    fn new(
        ev: &'a ThresholdEvaluator,
        sc: &Scenario,
        deadline: Option<Instant>,
        collect: bool,
    ) -> Self {
        let h_max = sc.max_threshold();
        let free: Vec<bool> = (0..sc.num_classes()).map(|c| sc.is_free(c)).collect();
        Self {
            ev,
            budget: Budget::new(sc.budget(), sc.feasibility_tolerance()),
            h_max,
            base: free.iter().map(|&f| if f { h_max } else { 0.0 }).collect(),
            active: (0..sc.num_classes()).filter(|&c| !free[c]).collect(),
            deadline,
            stop: AtomicBool::new(false),
            timed_out: AtomicBool::new(false),
            incumbent: AtomicU64::new(0f64.to_bits()),
            collect,
        }
    }

    fn out_of_time(&self) -> bool {
        if self.stop.load(AtomicOrdering::Relaxed) {
            return true;
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out.store(true, AtomicOrdering::Relaxed);
            self.stop.store(true, AtomicOrdering::Relaxed);
            return true;
        }
        false
    }

    fn order_for(&self, c: usize) -> Vec<usize> {
        self.active.iter().copied().filter(|&o| o != c).collect()
    }

    /// Range of `order[depth]` with the later classes and `c` pinned high, then low.
    fn range(
        &self,
        c: usize,
        order: &[usize],
        depth: usize,
        profile: &mut [f64],
    ) -> Result<super::FeasibleRange, RootError> {
        let next = order[depth];
        let pin = |v: f64, profile: &mut [f64]| {
            profile[c] = v;
            for &o in &order[depth + 1..] {
                profile[o] = v;
            }
        };
        pin(self.h_max, profile);
        let above = solve_boundary(self.ev.cost(), self.budget, next, profile)?;
        pin(0.0, profile);
        let below = solve_boundary(self.ev.cost(), self.budget, next, profile)?;
        Ok(range_from(above, below, self.h_max as usize))
    }

    fn tasks(&self) -> Result<Vec<(usize, Option<usize>)>, RootError> {
        let mut tasks = Vec::new();
        for &c in &self.active {
            let order = self.order_for(c);
            if order.is_empty() {
                tasks.push((c, None));
                continue;
            }
            let mut profile = self.base.clone();
            let r = self.range(c, &order, 0, &mut profile)?;
            tasks.extend(r.iter().map(|v| (c, Some(v))));
        }
        Ok(tasks)
    }

    fn run_task(&self, (c, first): (usize, Option<usize>)) -> Local {
        let mut local = Local::default();
        if self.out_of_time() {
            return local;
        }
        let order = self.order_for(c);
        let mut profile = self.base.clone();
        let depth = match first {
            Some(v) => {
                profile[order[0]] = v as f64;
                1
            }
            None => 0,
        };
        if let Err(e) = self.dfs(c, &order, depth, &mut profile, &mut local) {
            local.error = Some(e);
            self.stop.store(true, AtomicOrdering::Relaxed);
        }
        local
    }

    fn dfs(
        &self,
        c: usize,
        order: &[usize],
        depth: usize,
        profile: &mut [f64],
        local: &mut Local,
    ) -> Result<(), RootError> {
        if depth == order.len() {
            return self.leaf(c, profile, local);
        }
        if self.out_of_time() {
            return Ok(());
        }
        let r = self.range(c, order, depth, profile)?;
        let next = order[depth];
        for v in r.iter() {
            profile[next] = v as f64;
            self.dfs(c, order, depth + 1, profile, local)?;
            if self.stop.load(AtomicOrdering::Relaxed) {
                break;
            }
        }
        Ok(())
    }

    fn leaf(&self, c: usize, profile: &mut [f64], local: &mut Local) -> Result<(), RootError> {
        let r = match solve_boundary(self.ev.cost(), self.budget, c, profile)? {
            Boundary::Exact(r) => r,
            _ => return Ok(()),
        };
        profile[c] = r;
        local.enumerated += 1;
        if local.enumerated.is_multiple_of(1024) && self.out_of_time() {
            return Ok(());
        }
        if self.collect {
            local.profiles.push((c, profile.to_vec()));
        }

        let n_top = self.h_max as usize;
        let mut up_sum = 0.0;
        let mut ceil_sum = 0.0;
        for (o, &h) in profile.iter().enumerate() {
            up_sum += self.ev.log_miss_int(o, (h.floor() as usize + 1).min(n_top));
            let hc = if o == c {
                snap(h).ceil() as usize
            } else {
                h as usize
            };
            ceil_sum += self.ev.log_miss_int(o, hc.min(n_top));
        }
        local.ub = local.ub.max(-up_sum.exp_m1());

        let incumbent = f64::from_bits(self.incumbent.load(AtomicOrdering::Relaxed));
        if -ceil_sum.exp_m1() < incumbent - PRUNE_SLACK {
            return Ok(());
        }
        let s: f64 = profile
            .iter()
            .enumerate()
            .map(|(o, &h)| {
                if o == c {
                    self.ev.log_miss(o, h)
                } else {
                    self.ev.log_miss_int(o, h as usize)
                }
            })
            .sum();
        let cand = Candidate {
            objective: -s.exp_m1(),
            thresholds: profile.to_vec(),
        };
        if local.best.as_ref().is_none_or(|b| beats(&cand, b)) {
            // objectives are nonnegative, so their bit patterns order like the values
            self.incumbent
                .fetch_max(cand.objective.to_bits(), AtomicOrdering::Relaxed);
            local.best = Some(cand);
        }
        Ok(())
    }

    fn run(&self, sequential: bool) -> Result<Local, RootError> {
        let tasks = self.tasks()?;
        let local = if sequential {
            tasks
                .into_iter()
                .map(|t| self.run_task(t))
                .fold(Local::default(), Local::merge)
        } else {
            tasks
                .into_par_iter()
                .map(|t| self.run_task(t))
                .reduce(Local::default, Local::merge)
        };
        match local.error {
            Some(e) => Err(e),
            None => Ok(local),
        }
    }
}

/// Grid search with default options: parallel, no time limit.
pub fn grid_search(sc: &Scenario) -> Result<SolveReport, RootError> {
    grid_search_with(sc, &GridOptions::default())
}

pub fn grid_search_with(sc: &Scenario, opts: &GridOptions) -> Result<SolveReport, RootError> {
    let start = Instant::now();
    let ev = ThresholdEvaluator::new(sc);
    let ratio = Some(ratio_bound(sc.slots(), sc.resolution(), sc.num_classes()));
    let full = ThresholdPolicy::full(sc);
    if ev.energy(full.thresholds()) <= sc.budget() + sc.feasibility_tolerance() {
        let objective = ev.delivery_of(&full);
        return Ok(SolveReport {
            energy: ev.energy(full.thresholds()),
            policy: full,
            objective,
            upper_bound: Some(objective),
            ratio_bound: ratio,
            enumerated: 0,
            wall_time: start.elapsed().as_secs_f64(),
            all_full: true,
            complete: true,
        });
    }

    let search = Search::new(&ev, sc, opts.time_limit.map(|d| start + d), false);
    let local = search.run(opts.sequential)?;
    let complete = !search.timed_out.load(AtomicOrdering::Relaxed);
    let thresholds = local
        .best
        .map(|b| b.thresholds)
        .unwrap_or_else(|| search.base.clone());
    let objective = ev.delivery(&thresholds);
    Ok(SolveReport {
        energy: ev.energy(&thresholds),
        policy: ThresholdPolicy::new(thresholds),
        objective,
        upper_bound: complete.then_some(local.ub.max(objective)),
        ratio_bound: ratio,
        enumerated: local.enumerated,
        wall_time: start.elapsed().as_secs_f64(),
        all_full: false,
        complete,
    })
}

/// Best rounded-up objective over all saturating profiles. It ignores the
/// budget after rounding, so it bounds the optimum from above.
pub fn upper_bound(sc: &Scenario) -> Result<f64, RootError> {
    let report = grid_search(sc)?;
    Ok(report.upper_bound.expect("no time limit was set"))
}

/// One saturating profile visited by the enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedProfile {
    pub fractional_class: usize,
    pub thresholds: Vec<f64>,
}

impl EnumeratedProfile {
    /// The fractional class and the integer thresholds of all other classes.
    pub fn key(&self) -> (usize, Vec<usize>) {
        let others = self
            .thresholds
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != self.fractional_class)
            .map(|(_, &h)| h as usize)
            .collect();
        (self.fractional_class, others)
    }
}

/// Every saturating profile the search visits, in a canonical order. Unlike
/// [`grid_search`] this never short-circuits on an affordable full profile.
pub fn enumerate_profiles(sc: &Scenario) -> Result<Vec<EnumeratedProfile>, RootError> {
    let ev = ThresholdEvaluator::new(sc);
    let search = Search::new(&ev, sc, None, true);
    let mut out: Vec<_> = search
        .run(true)?
        .profiles
        .into_iter()
        .map(|(fractional_class, thresholds)| EnumeratedProfile {
            fractional_class,
            thresholds,
        })
        .collect();
    out.sort_by_key(EnumeratedProfile::key);
    Ok(out)
}

/// Scans every integer assignment of the non-fractional classes and keeps
/// those where the fractional class can exhaust the budget somewhere in
/// `[0, h_max]`. Exponential; meant for small cross-checks.
pub fn brute_force_profiles(sc: &Scenario) -> Vec<(usize, Vec<usize>)> {
    let ev = ThresholdEvaluator::new(sc);
    let h_max = sc.max_threshold() as usize;
    let budget = sc.budget();
    let tol = sc.feasibility_tolerance();
    let free: Vec<bool> = (0..sc.num_classes()).map(|c| sc.is_free(c)).collect();
    let mut out = Vec::new();
    for c in (0..sc.num_classes()).filter(|&c| !free[c]) {
        let others: Vec<usize> = (0..sc.num_classes()).filter(|&o| o != c).collect();
        let mut digits = vec![0usize; others.len()];
        loop {
            let mut profile: Vec<f64> = (0..sc.num_classes())
                .map(|o| if free[o] { h_max as f64 } else { 0.0 })
                .collect();
            let mut valid = true;
            for (i, &o) in others.iter().enumerate() {
                if free[o] {
                    valid &= digits[i] == 0;
                } else {
                    profile[o] = digits[i] as f64;
                }
            }
            if valid {
                profile[c] = 0.0;
                let low = ev.energy(&profile);
                profile[c] = h_max as f64;
                let high = ev.energy(&profile);
                if low <= budget + tol && high >= budget - tol {
                    let key = others.iter().map(|&o| profile[o] as usize).collect();
                    out.push((c, key));
                }
            }
            // odometer increment
            let mut i = 0;
            while i < digits.len() {
                digits[i] += 1;
                if digits[i] <= h_max {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
            if i == digits.len() {
                break;
            }
        }
    }
    out.sort();
    out
}
