//! Exhaustive grid search over budget-saturating threshold profiles.
//!
//! An optimal profile spends the whole budget and has at most one class with a
//! fractional threshold. For every choice of that class, the remaining classes
//! are fixed to integer thresholds in a fixed order; each one only ranges over
//! values for which some completion can still hit the budget exactly. At a leaf
//! the fractional class takes the threshold that exhausts the budget.

mod boundary;
mod search;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;

use crate::model::{ProfileCost, Scenario, ThresholdPolicy};
use crate::roots::RootError;

pub(crate) use boundary::{solve_boundary, Budget};
pub use boundary::{Boundary, BOUNDARY_RTOL};
pub use search::{
    brute_force_profiles, enumerate_profiles, grid_search, grid_search_with, upper_bound,
};

/// Fixed integer thresholds for some classes while searching for `fractional_class`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialAssignment {
    pub fractional_class: usize,
    pub assigned: BTreeMap<usize, usize>,
}

impl PartialAssignment {
    pub fn new(fractional_class: usize) -> Self {
        Self {
            fractional_class,
            assigned: BTreeMap::new(),
        }
    }

    /// # Panics
    /// Panics when assigning the fractional class itself.
    pub fn with(mut self, class: usize, threshold: usize) -> Self {
        assert_ne!(
            class, self.fractional_class,
            "the fractional class is never assigned"
        );
        self.assigned.insert(class, threshold);
        self
    }
}

/// How classes without an assigned threshold are filled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completion {
    Full,
    Empty,
}

/// Integer thresholds `lo..=hi` for the next class in the order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibleRange {
    pub lo: usize,
    pub hi: usize,
}

impl FeasibleRange {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.hi - self.lo + 1
        }
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }

    pub(crate) fn empty() -> Self {
        Self { lo: 1, hi: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GridOptions {
    /// Stop enumerating after this long and return the best profile so far.
    pub time_limit: Option<Duration>,
    pub sequential: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub policy: ThresholdPolicy,
    pub objective: f64,
    pub energy: f64,
    pub upper_bound: Option<f64>,
    pub ratio_bound: Option<f64>,
    /// Saturating profiles visited.
    pub enumerated: u64,
    pub wall_time: f64,
    /// The full-transmission profile was affordable and nothing was enumerated.
    pub all_full: bool,
    /// False when the time limit cut the enumeration short; the policy is then
    /// the best found so far and the bounds are withheld.
    pub complete: bool,
}

fn fill_profile(
    target: usize,
    partial: &PartialAssignment,
    completion: Completion,
    sc: &Scenario,
) -> Vec<f64> {
    let h_max = sc.max_threshold();
    (0..sc.num_classes())
        .map(|c| {
            if c == target {
                0.0
            } else if let Some(&h) = partial.assigned.get(&c) {
                h as f64
            } else {
                match completion {
                    Completion::Full => h_max,
                    Completion::Empty => 0.0,
                }
            }
        })
        .collect()
}

/// Threshold of class `target` that exhausts the budget when the assigned
/// classes keep their thresholds and every other class follows `completion`.
pub fn boundary_threshold(
    target: usize,
    partial: &PartialAssignment,
    completion: Completion,
    sc: &Scenario,
) -> Result<Boundary, RootError> {
    let mut profile = fill_profile(target, partial, completion, sc);
    let budget = Budget::new(sc.budget(), sc.feasibility_tolerance());
    solve_boundary(&ProfileCost::new(sc), budget, target, &mut profile)
}

/// Snaps values within 1e-9 of an integer before rounding.
pub(crate) fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

pub(crate) fn range_from(above: Boundary, below: Boundary, h_max: usize) -> FeasibleRange {
    let lo = match above {
        Boundary::BudgetExceeded => 0,
        Boundary::Exact(r) => snap(r).ceil() as usize,
        Boundary::Unbounded => return FeasibleRange::empty(),
    };
    let hi = match below {
        Boundary::BudgetExceeded => return FeasibleRange::empty(),
        Boundary::Exact(r) => (snap(r).floor() as usize).min(h_max),
        Boundary::Unbounded => h_max,
    };
    FeasibleRange { lo, hi }
}

/// Integer thresholds of `target` for which some completion of the remaining
/// classes (the fractional class included) can exhaust the budget.
pub fn feasible_range(
    target: usize,
    partial: &PartialAssignment,
    sc: &Scenario,
) -> Result<FeasibleRange, RootError> {
    let above = boundary_threshold(target, partial, Completion::Full, sc)?;
    let below = boundary_threshold(target, partial, Completion::Empty, sc)?;
    Ok(range_from(above, below, sc.max_threshold() as usize))
}

/// Worst-case objective ratio of grid search against the optimum:
/// `(1 - 2^{-(K-1)R}) / (1 - 2^{-|C|(K-1)R})`.
///
/// With a single slot (`K = 1`) both sides vanish and the limit `1/|C|` is returned.
pub fn ratio_bound(slots: usize, resolution: u32, classes: usize) -> f64 {
    assert!(slots >= 1 && resolution >= 1 && classes >= 1);
    if classes == 1 {
        return 1.0;
    }
    let e = ((slots - 1) as f64) * f64::from(resolution);
    if e == 0.0 {
        return 1.0 / classes as f64;
    }
    let num = -(-e * std::f64::consts::LN_2).exp_m1();
    let den = -(-(classes as f64) * e * std::f64::consts::LN_2).exp_m1();
    num / den
}

/// [`ratio_bound`] as the number of classes grows without bound.
pub fn ratio_bound_limit(slots: usize, resolution: u32) -> f64 {
    let e = ((slots - 1) as f64) * f64::from(resolution);
    -(-e * std::f64::consts::LN_2).exp_m1()
}
