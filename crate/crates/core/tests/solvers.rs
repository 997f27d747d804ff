use proptest::prelude::*;
use twohop_core::baselines::{arrival_rate_greedy, class_independent};
use twohop_core::greedy::{greedy_construct, GreedyVariant};
use twohop_core::gridsearch::grid_search;
use twohop_core::mcsim::{simulate, SimConfig};
use twohop_core::model::{evaluate, NodeClass, Scenario, ThresholdEvaluator, ThresholdPolicy};

prop_compose! {
    fn instance()(
        slots in 1usize..5,
        res in 1u32..4,
        beacon in prop_oneof![Just(0.0), 0.0..0.05f64],
        classes in prop::collection::vec(
            (1u32..15, 1u32..5, 1e-4..5e-3f64, 0.1..2.0f64, any::<bool>()),
            1..4,
        ),
        frac in 0.0..1.2f64,
    ) -> Scenario {
        let mut b = Scenario::builder()
            .deadline(slots as f64 * 100.0)
            .slot_len(100.0)
            .resolution(res)
            .technology("a", beacon)
            .technology("b", 0.0);
        for (n, ttl, rate, rho, first) in classes {
            let ttl = ttl.min(slots as u32);
            b = b.class(NodeClass::with_rate(n, ttl, rate, rho, if first { "a" } else { "b" }));
        }
        let sc = b.build().unwrap();
        let full = ThresholdEvaluator::new(&sc)
            .cost()
            .energy(ThresholdPolicy::full(&sc).thresholds());
        sc.with_budget(full * frac).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_dominates_and_is_feasible(sc in instance()) {
        let grid = grid_search(&sc).unwrap();
        let limit = sc.budget() + sc.feasibility_tolerance();
        prop_assert!(grid.energy <= limit);
        prop_assert!(grid.upper_bound.unwrap() >= grid.objective);
        let ev = ThresholdEvaluator::new(&sc);
        let others = [
            arrival_rate_greedy(&sc).unwrap(),
            class_independent(&sc).unwrap().policy(&sc),
            greedy_construct(&sc, GreedyVariant::Gain).unwrap().policy,
        ];
        for p in &others {
            prop_assert!(ev.energy(p.thresholds()) <= limit);
            prop_assert!(ev.delivery_of(p) <= grid.objective + 1e-12);
        }
    }

    #[test]
    fn fast_and_generic_evaluation_agree_on_solutions(sc in instance()) {
        let grid = grid_search(&sc).unwrap();
        let pol = grid.policy.expand(&sc).unwrap();
        let e = evaluate(&pol, &sc);
        prop_assert!((e.delivery_prob - grid.objective).abs() < 1e-12);
        prop_assert!((e.energy_spent - grid.energy).abs() < 1e-9 * (1.0 + grid.energy));
        prop_assert!(e.feasible);
    }

    #[test]
    fn more_budget_never_hurts(sc in instance(), extra in 0.0..0.5f64) {
        let a = grid_search(&sc).unwrap();
        let b = grid_search(&sc.with_budget(sc.budget() * (1.0 + extra) + 1e-3).unwrap()).unwrap();
        prop_assert!(b.objective >= a.objective - 1e-12);
    }
}

#[test]
fn simulation_depends_only_on_seed() {
    let sc = Scenario::builder()
        .deadline(500.0)
        .slot_len(100.0)
        .resolution(2)
        .budget(1.0)
        .technology("a", 0.01)
        .class(NodeClass::with_rate(5, 3, 1e-3, 0.5, "a"))
        .class(NodeClass::with_rate(3, 5, 2e-3, 0.2, "a"))
        .build()
        .unwrap();
    let pol = grid_search(&sc).unwrap().policy.expand(&sc).unwrap();
    let run = |seed| simulate(&sc, &pol, &SimConfig::new(5000, seed)).unwrap();
    let (a, b, c) = (run(1), run(1), run(2));
    assert_eq!(a.delivery_freq.to_bits(), b.delivery_freq.to_bits());
    assert_eq!(a.mean_energy.to_bits(), b.mean_energy.to_bits());
    assert_ne!(a.delivery_freq.to_bits(), c.delivery_freq.to_bits());
}
