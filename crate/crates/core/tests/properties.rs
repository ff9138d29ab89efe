use std::collections::BTreeMap;

use mixcost::casegen::{gen_random, OpWeights};
use mixcost::circuit::{Circuit, CircuitBuilder, NodeId, OpKind, Party};
use mixcost::cost_model::{
    check_feasible, exact_sum, shipped_profiles, total_cost, CostProfile, Scheme,
};
use mixcost::optimizer::{
    best_of, bottom_up, exhaustive_optimal, fixed_sharing, hill_climbing, hill_climbing_with,
    top_down, HillObjective, HillOptions, OptimizeResult, SolverLimits, SweepOrder,
};
use proptest::prelude::*;

fn profile(i: usize) -> CostProfile {
    shipped_profiles().swap_remove(i % 8)
}

fn heuristics(c: &Circuit, p: &CostProfile) -> Vec<OptimizeResult> {
    let limits = SolverLimits::default();
    vec![
        fixed_sharing(c, p, &Scheme::yao()).unwrap(),
        fixed_sharing(c, p, &Scheme::boolean()).unwrap(),
        bottom_up(c, p),
        top_down(c, p),
        hill_climbing(c, p, &Scheme::yao(), &limits).unwrap(),
        hill_climbing(c, p, &Scheme::boolean(), &limits).unwrap(),
        best_of(c, p, &limits),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn topological_order_respects_edges(seed in any::<u64>(), n in 1usize..40) {
        let c = gen_random(seed, n, &OpWeights::default()).unwrap();
        let order = c.topological_order();
        let mut position = vec![usize::MAX; c.len()];
        for (k, id) in order.iter().enumerate() {
            prop_assert_eq!(position[id.0], usize::MAX);
            position[id.0] = k;
        }
        prop_assert_eq!(order.len(), c.len());
        for node in c.nodes() {
            for u in &node.inputs {
                prop_assert!(position[u.0] < position[node.id.0]);
            }
        }
    }

    #[test]
    fn circuit_json_round_trip(seed in any::<u64>(), n in 1usize..30) {
        let c = gen_random(seed, n, &OpWeights::default()).unwrap();
        let text = c.to_json();
        let back = Circuit::from_json(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn sub_is_modular(a in any::<u32>(), b in any::<u32>(), width in prop::sample::select(vec![8u32, 16, 32, 64])) {
        let mut builder = CircuitBuilder::new(width);
        let x = builder.input(Party::Client, "a");
        let y = builder.input(Party::Server, "b");
        let d = builder.op(OpKind::Sub, &[x, y]);
        builder.output(d, "d");
        let c = builder.finish().unwrap();
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        let (a, b) = (u64::from(a) & mask, u64::from(b) & mask);
        let out = c.evaluate_plaintext(&BTreeMap::from([(x, a), (y, b)])).unwrap();
        let expected = (a as u128 + (1u128 << width) - b as u128) % (1u128 << width);
        prop_assert_eq!(out[&NodeId(3)] as u128, expected);
    }

    #[test]
    fn cost_is_linear_in_scale(seed in any::<u64>(), k in 0.01f64..100.0, pi in 0usize..8) {
        let c = gen_random(seed, 12, &OpWeights::default()).unwrap();
        let p = profile(pi);
        let scaled = p.scaled(k);
        for r in heuristics(&c, &p) {
            let again = total_cost(&c, &r.assignment, &scaled).unwrap();
            let expected = k * r.report.total;
            prop_assert!((again.total - expected).abs() <= 1e-12 * expected.abs().max(1e-300));
        }
    }

    #[test]
    fn power_of_two_scaling_keeps_choices(seed in any::<u64>(), j in -20i32..20, pi in 0usize..8) {
        let c = gen_random(seed, 8, &OpWeights::default()).unwrap();
        let p = profile(pi);
        let scaled = p.scaled(2f64.powi(j));
        let a: Vec<_> = heuristics(&c, &p).into_iter().map(|r| r.assignment).collect();
        let b: Vec<_> = heuristics(&c, &scaled).into_iter().map(|r| r.assignment).collect();
        prop_assert_eq!(a, b);
        let e1 = exhaustive_optimal(&c, &p, &SolverLimits::default()).unwrap();
        let e2 = exhaustive_optimal(&c, &scaled, &SolverLimits::default()).unwrap();
        prop_assert_eq!(e1.assignment, e2.assignment);
    }

    #[test]
    fn exhaustive_dominates(seed in any::<u64>(), n in 1usize..9, pi in 0usize..8) {
        let c = gen_random(seed, n, &OpWeights::default()).unwrap();
        let p = profile(pi);
        let opt = exhaustive_optimal(&c, &p, &SolverLimits::default()).unwrap();
        prop_assert!(check_feasible(&c, &opt.assignment, &p).is_empty());
        for r in heuristics(&c, &p) {
            prop_assert!(opt.report.total <= r.report.total, "{} beat exhaustive", r.heuristic);
        }
    }

    #[test]
    fn reports_are_consistent(seed in any::<u64>(), pi in 0usize..8) {
        let c = gen_random(seed, 15, &OpWeights::default()).unwrap();
        let p = profile(pi);
        for r in heuristics(&c, &p) {
            prop_assert!(check_feasible(&c, &r.assignment, &p).is_empty());
            let recomputed = total_cost(&c, &r.assignment, &p).unwrap();
            prop_assert_eq!(&recomputed, &r.report);
            let per_node: Vec<f64> = r.report.per_node.iter().map(|n| n.total()).collect();
            let sum = exact_sum(per_node);
            prop_assert!((sum - r.report.total).abs() <= 1e-12 * r.report.total.max(1e-300));
            let split = r.report.total_compute + r.report.total_network;
            prop_assert!((split - r.report.total).abs() <= 1e-12 * r.report.total.max(1e-300));
        }
    }

    #[test]
    fn heuristics_are_deterministic(seed in any::<u64>(), pi in 0usize..8) {
        let c = gen_random(seed, 20, &OpWeights::default()).unwrap();
        let p = profile(pi);
        let a: Vec<String> = heuristics(&c, &p).iter().map(|r| r.assignment.to_json()).collect();
        let b: Vec<String> = heuristics(&c, &p).iter().map(|r| r.assignment.to_json()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn hill_settles_in_either_order(seed in any::<u64>(), n in 1usize..12, pi in 0usize..8) {
        let c = gen_random(seed, n, &OpWeights::default()).unwrap();
        let p = profile(pi);
        let limits = SolverLimits::default();
        let opt = exhaustive_optimal(&c, &p, &limits).unwrap();
        for order in [SweepOrder::Forward, SweepOrder::Reverse] {
            let options = HillOptions { order, ..HillOptions::default() };
            let r = hill_climbing_with(&c, &p, &Scheme::yao(), &limits, options).unwrap();
            prop_assert!(!r.limit_exceeded);
            prop_assert!(r.sweep_totals.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(opt.report.total <= r.report.total);
        }
    }

    #[test]
    fn node_cost_objective_stays_feasible(seed in any::<u64>(), pi in 0usize..8) {
        let c = gen_random(seed, 15, &OpWeights::default()).unwrap();
        let p = profile(pi);
        let options = HillOptions { objective: HillObjective::NodeCost, ..HillOptions::default() };
        let r = hill_climbing_with(&c, &p, &Scheme::yao(), &SolverLimits::default(), options).unwrap();
        prop_assert!(check_feasible(&c, &r.assignment, &p).is_empty());
        prop_assert!(r.iterations <= SolverLimits::default().passes_for(&c, &p));
    }
}

/// Forward and reverse sweeps can stop in different local optima; this
/// measures how often and by how much on a fixed corpus.
#[test]
fn sweep_order_gap_is_bounded_by_the_optimum() {
    let limits = SolverLimits::default();
    let mut differing = 0;
    let mut worst_gap: f64 = 0.0;
    let profiles = shipped_profiles();
    for seed in 0..100 {
        let c = gen_random(seed, 8, &OpWeights::default()).unwrap();
        for p in &profiles {
            let run = |order| {
                let options = HillOptions {
                    order,
                    ..HillOptions::default()
                };
                hill_climbing_with(&c, p, &Scheme::yao(), &limits, options).unwrap()
            };
            let (f, r) = (run(SweepOrder::Forward), run(SweepOrder::Reverse));
            let opt = exhaustive_optimal(&c, p, &limits).unwrap().report.total;
            assert!(opt <= f.report.total && opt <= r.report.total);
            if f.report.total != r.report.total {
                differing += 1;
                let gap =
                    (f.report.total - r.report.total).abs() / f.report.total.max(r.report.total);
                worst_gap = worst_gap.max(gap);
            }
        }
    }
    println!("sweep orders differ on {differing}/800 instances, worst relative gap {worst_gap:.4}");
}
