//! Reference heuristics: budget allocation by descending contact rate, and a
//! single threshold shared by every class.

use serde::Serialize;

use crate::gridsearch::{solve_boundary, Budget};
use crate::model::{ProfileCost, Scenario, ThresholdPolicy};
use crate::roots::{newton_bisect, RootError};

/// Visits classes from the highest contact rate down (lowest index on ties)
/// and gives each the largest threshold the remaining budget affords, with
/// the classes not yet visited at zero.
pub fn arrival_rate_greedy(sc: &Scenario) -> Result<ThresholdPolicy, RootError> {
    let h_max = sc.max_threshold();
    let cost = ProfileCost::new(sc);
    let budget = Budget::new(sc.budget(), sc.feasibility_tolerance());
    let mut profile: Vec<f64> = (0..sc.num_classes())
        .map(|c| if sc.is_free(c) { h_max } else { 0.0 })
        .collect();
    let mut order: Vec<usize> = (0..sc.num_classes()).filter(|&c| !sc.is_free(c)).collect();
    order.sort_by(|&a, &b| {
        sc.contact_rate(b)
            .total_cmp(&sc.contact_rate(a))
            .then(a.cmp(&b))
    });
    for c in order {
        let b = solve_boundary(&cost, budget, c, &mut profile)?;
        profile[c] = b.clamped(h_max).unwrap_or(0.0);
    }
    Ok(ThresholdPolicy::new(profile))
}

/// Outcome of the common-threshold solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "snake_case")]
pub enum UniformThreshold {
    /// The shared threshold that spends the budget exactly.
    Saturating(f64),
    /// Full transmission is affordable.
    Clamped(f64),
    /// Zero budget: nothing can be sent.
    NoConsumption,
}

impl UniformThreshold {
    pub fn threshold(self) -> f64 {
        match self {
            UniformThreshold::Saturating(h) | UniformThreshold::Clamped(h) => h,
            UniformThreshold::NoConsumption => 0.0,
        }
    }

    /// The policy with every paying class at the shared threshold; classes
    /// that cost nothing stay at full transmission.
    pub fn policy(self, sc: &Scenario) -> ThresholdPolicy {
        let h = self.threshold();
        let h_max = sc.max_threshold();
        ThresholdPolicy::new(
            (0..sc.num_classes())
                .map(|c| if sc.is_free(c) { h_max } else { h })
                .collect(),
        )
    }
}

fn uniform_energy(cost: &ProfileCost, active: &[usize], base: &[f64], h: f64) -> (f64, f64) {
    let mut p = base.to_vec();
    for &c in active {
        p[c] = h;
    }
    let mut slope: f64 = active.iter().map(|&c| cost.tx_slope(c, h)).sum();
    let alpha = h - h.floor();
    for w in 0..cost.technologies() {
        let m = cost
            .members(w)
            .iter()
            .filter(|c| active.contains(c))
            .count() as i32;
        let b = cost.beacon_per_sub_slot(w);
        if m > 0 && b > 0.0 {
            // d/dh of b (floor(h) + 1 - (1 - alpha)^m)
            slope += b * f64::from(m) * (1.0 - alpha).powi(m - 1);
        }
    }
    (cost.energy(&p), slope)
}

/// Solves for one threshold shared by all classes that spends the budget.
///
/// Energy is evaluated with the same model as every other solver: classes on
/// a shared technology beacon independently in the fractional sub-slot.
pub fn class_independent(sc: &Scenario) -> Result<UniformThreshold, RootError> {
    let h_max = sc.max_threshold();
    let cost = ProfileCost::new(sc);
    let active: Vec<usize> = (0..sc.num_classes()).filter(|&c| !sc.is_free(c)).collect();
    let base: Vec<f64> = (0..sc.num_classes())
        .map(|c| if sc.is_free(c) { h_max } else { 0.0 })
        .collect();
    let budget = sc.budget();
    let tol = sc.feasibility_tolerance();
    if budget <= 0.0 {
        return Ok(UniformThreshold::NoConsumption);
    }
    if uniform_energy(&cost, &active, &base, h_max).0 <= budget + tol {
        return Ok(UniformThreshold::Clamped(h_max));
    }
    let h = newton_bisect(
        |h| {
            let (e, de) = uniform_energy(&cost, &active, &base, h);
            (e - budget, de)
        },
        0.0,
        h_max,
        0.0,
        Budget::new(budget, tol).root,
    )?;
    Ok(UniformThreshold::Saturating(h))
}

/// Budget residual of a shared threshold `h` when every class has the same
/// transmission cost `rho` and uses its own technology:
/// `sum N_c e^{-a_c h} - sum N_c - h sum_w b_w / rho + budget / rho`.
/// Decreasing in `h`, zero at the saturating threshold. `None` when the
/// transmission costs differ, the costs are zero, or a technology is shared.
pub fn homogeneous_residual(sc: &Scenario, h: f64) -> Option<f64> {
    let rho = sc.class(0).tx_cost;
    if rho <= 0.0 || sc.classes().iter().any(|c| c.tx_cost != rho) {
        return None;
    }
    if (0..sc.technologies().len()).any(|w| sc.members(w).len() > 1) {
        return None;
    }
    let mut g = sc.budget() / rho;
    for c in 0..sc.num_classes() {
        let n = f64::from(sc.class(c).population);
        g += n * (-sc.contacts_per_sub_slot(c) * h).exp() - n;
        g -= sc.beacon_per_sub_slot(sc.technology_of(c)) * h / rho;
    }
    Some(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeClass;
    use proptest::prelude::*;

    fn with_rates(rates: &[f64], budget: f64) -> Scenario {
        let mut b = Scenario::builder()
            .deadline(20.0)
            .slot_len(1.0)
            .budget(budget)
            .technology("t", 0.0);
        for &r in rates {
            b = b.class(NodeClass::with_rate(1, 20, r, 1.0, "t"));
        }
        b.build().unwrap()
    }

    #[test]
    fn highest_rate_takes_small_budget() {
        let sc = with_rates(&[0.1, 0.3, 0.2], 0.3);
        let tp = arrival_rate_greedy(&sc).unwrap();
        assert!(tp.get(1) > 0.0);
        assert_eq!(tp.get(0), 0.0);
        assert_eq!(tp.get(2), 0.0);
        let e = ProfileCost::new(&sc).energy(tp.thresholds());
        assert!((e - 0.3).abs() < 1e-12);
    }

    #[test]
    fn large_budget_fills_everything() {
        let sc = with_rates(&[0.1, 0.3, 0.2], 10.0);
        assert_eq!(arrival_rate_greedy(&sc).unwrap().thresholds(), &[19.0; 3]);
        assert_eq!(
            class_independent(&sc).unwrap(),
            UniformThreshold::Clamped(19.0)
        );
    }

    #[test]
    fn single_class_inversion() {
        let sc = with_rates(&[0.1], 1.0 - (-0.2f64).exp());
        let UniformThreshold::Saturating(h) = class_independent(&sc).unwrap() else {
            panic!()
        };
        assert!((h - 2.0).abs() < 1e-10);
        assert!((arrival_rate_greedy(&sc).unwrap().get(0) - 2.0).abs() < 1e-10);
        assert_eq!(
            class_independent(&with_rates(&[0.1], 0.0)).unwrap(),
            UniformThreshold::NoConsumption
        );
    }

    #[test]
    fn identical_classes_match_doubled_population() {
        let two = with_rates(&[0.05, 0.05], 0.6);
        let one = Scenario::builder()
            .deadline(20.0)
            .slot_len(1.0)
            .budget(0.6)
            .technology("t", 0.0)
            .class(NodeClass::with_rate(2, 20, 0.05, 1.0, "t"))
            .build()
            .unwrap();
        let a = class_independent(&two).unwrap().threshold();
        let b = class_independent(&one).unwrap().threshold();
        assert!((a - b).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn homogeneous_residual_root_agrees(
            rates in prop::collection::vec(0.01f64..0.2, 1..4),
            pops in prop::collection::vec(1u32..10, 4),
            beacons in prop::collection::vec(0.0f64..0.05, 4),
            frac in 0.05f64..0.95,
        ) {
            let mut b = Scenario::builder().deadline(20.0).slot_len(1.0).budget(1.0);
            for (i, &r) in rates.iter().enumerate() {
                let id = format!("t{i}");
                b = b.technology(&id, beacons[i]).class(NodeClass::with_rate(pops[i], 20, r, 0.7, &id));
            }
            let sc = b.build().unwrap();
            let full = ProfileCost::new(&sc).energy(&vec![19.0; sc.num_classes()]);
            let sc = sc.with_budget(full * frac).unwrap();
            let h = class_independent(&sc).unwrap().threshold();
            let g = homogeneous_residual(&sc, h).unwrap();
            // independent beaconing and all-or-none agree with one class per technology
            prop_assert!(g.abs() < 1e-9, "g = {g}");
            prop_assert!(homogeneous_residual(&sc, h + 0.1).unwrap() < g);
        }

        #[test]
        fn baselines_feasible(
            rates in prop::collection::vec(0.001f64..0.3, 1..4),
            frac in 0.0f64..1.5,
            beacon in 0.0f64..0.05,
        ) {
            let mut b = Scenario::builder().deadline(10.0).slot_len(1.0).budget(1.0).technology("t", beacon);
            for &r in &rates {
                b = b.class(NodeClass::with_rate(3, 4, r, 0.5, "t"));
            }
            let sc = b.build().unwrap();
            let full = ProfileCost::new(&sc).energy(&vec![9.0; sc.num_classes()]);
            let sc = sc.with_budget(full * frac).unwrap();
            let cost = ProfileCost::new(&sc);
            let limit = sc.budget() + sc.feasibility_tolerance();
            prop_assert!(cost.energy(arrival_rate_greedy(&sc).unwrap().thresholds()) <= limit);
            let u = class_independent(&sc).unwrap().policy(&sc);
            prop_assert!(cost.energy(u.thresholds()) <= limit);
        }
    }
}
