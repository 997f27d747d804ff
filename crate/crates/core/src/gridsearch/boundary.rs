use crate::model::ProfileCost;
use crate::roots::{newton_bisect, RootError};

/// Relative residual accepted by the boundary solver.
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Where a class's threshold exhausts the remaining budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Saturating threshold in `[0, h_max]`.
    Exact(f64),
    /// Even the largest threshold leaves budget unspent.
    Unbounded,
    /// The other classes already spend more than the budget.
    BudgetExceeded,
}

impl Boundary {
    /// Threshold to use when the class may take all it can afford.
    pub fn clamped(self, h_max: f64) -> Option<f64> {
        match self {
            Boundary::Exact(h) => Some(h),
            Boundary::Unbounded => Some(h_max),
            Boundary::BudgetExceeded => None,
        }
    }
}

/// Budget tolerances shared by the solvers.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Budget {
    pub value: f64,
    /// slack for feasibility verdicts
    pub feasible: f64,
    /// residual target for root solves
    pub root: f64,
}

impl Budget {
    pub fn new(value: f64, feasible: f64) -> Self {
        Self {
            value,
            feasible,
            root: BOUNDARY_RTOL * value.max(1.0),
        }
    }
}

/// Solves for `profile[c]` so the profile's energy equals the budget; the
/// other entries of `profile` are held fixed. `profile[c]` is left at the
/// returned threshold (or at 0 / h_max for the degenerate verdicts).
pub(crate) fn solve_boundary(
    cost: &ProfileCost,
    budget: Budget,
    c: usize,
    profile: &mut [f64],
) -> Result<Boundary, RootError> {
    let h_max = cost.max_threshold();
    profile[c] = 0.0;
    let cost0 = cost.energy(profile);
    if cost0 > budget.value + budget.feasible {
        return Ok(Boundary::BudgetExceeded);
    }
    if cost0 >= budget.value - budget.feasible {
        return Ok(Boundary::Exact(0.0));
    }
    profile[c] = h_max;
    let cost_max = cost.energy(profile);
    if cost_max < budget.value - budget.feasible {
        return Ok(Boundary::Unbounded);
    }
    if cost_max <= budget.value + budget.feasible {
        return Ok(Boundary::Exact(h_max));
    }

    // transmission-only inversion; exact when the class does not beacon
    let w = cost.tx_weight(c);
    let a = cost.rate_dt(c);
    let rem = budget.value - cost0;
    let guess = if w > 0.0 && a > 0.0 && rem < w {
        (-(-rem / w).ln_1p() / a).clamp(0.0, h_max)
    } else {
        h_max
    };
    if cost.beacon_per_sub_slot(cost.technology_of(c)) == 0.0 {
        profile[c] = guess;
        return Ok(Boundary::Exact(guess));
    }

    let mut scratch = profile.to_vec();
    let h = newton_bisect(
        |x| {
            scratch[c] = x;
            let (e, de) = cost.energy_and_slope(c, &scratch);
            (e - budget.value, de)
        },
        0.0,
        h_max,
        guess,
        budget.root,
    )?;
    profile[c] = h;
    Ok(Boundary::Exact(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeClass, Scenario};

    fn two_class(budget: f64, beacon: f64, shared: bool) -> Scenario {
        Scenario::builder()
            .deadline(2000.0)
            .slot_len(100.0)
            .budget(budget)
            .technology("a", beacon)
            .technology("b", beacon)
            .class(NodeClass::with_rate(1, 20, 21e-5, 1.0, "a"))
            .class(NodeClass::with_rate(
                2,
                20,
                20e-5,
                1.0,
                if shared { "a" } else { "b" },
            ))
            .build()
            .unwrap()
    }

    fn solve(sc: &Scenario, c: usize, profile: &mut [f64]) -> Boundary {
        let cost = ProfileCost::new(sc);
        let b = Budget::new(sc.budget(), sc.feasibility_tolerance());
        solve_boundary(&cost, b, c, profile).unwrap()
    }

    #[test]
    fn closed_form_matches_bisection() {
        let sc = two_class(0.7, 0.0, false);
        let mut p = [0.0, 15.0];
        let Boundary::Exact(r) = solve(&sc, 0, &mut p) else {
            panic!()
        };
        // independent bisection on 1 - e^{-0.021 r} = 0.7 - 2(1 - e^{-0.3})
        let target = 0.7 - 2.0 * (1.0 - (-0.3f64).exp());
        let (mut lo, mut hi) = (0.0f64, 19.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - (-0.021 * mid).exp() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((r - lo).abs() < 1e-9, "{r} vs {lo}");
        assert!((r - 9.545).abs() < 1e-3);
    }

    #[test]
    fn degenerate_verdicts() {
        let sc = two_class(0.5, 0.0, false);
        assert_eq!(solve(&sc, 0, &mut [0.0, 19.0]), Boundary::BudgetExceeded);
        let sc = two_class(5.0, 0.0, false);
        assert_eq!(solve(&sc, 0, &mut [0.0, 0.0]), Boundary::Unbounded);
        let sc = two_class(0.0, 0.0, false);
        assert_eq!(solve(&sc, 1, &mut [0.0, 0.0]), Boundary::Exact(0.0));
    }

    #[test]
    fn newton_saturates_with_beacons() {
        for shared in [false, true] {
            let sc = two_class(0.7, 0.004, shared);
            let cost = ProfileCost::new(&sc);
            for other in [0.0, 3.0, 7.5, 12.0] {
                let mut p = [0.0, other];
                if let Boundary::Exact(r) = solve(&sc, 0, &mut p) {
                    let e = cost.energy(&[r, other]);
                    assert!(
                        (e - 0.7).abs() < 1e-11,
                        "shared={shared} other={other} e={e}"
                    );
                }
            }
        }
    }
}
