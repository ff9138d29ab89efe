//! Single-pass greedy heuristics over the topological order.

use crate::circuit::{Circuit, OpKind};
use crate::cost_model::CostProfile;

use super::{argmin, pair_sum, OptimizeResult};

/// Assigns nodes inputs-first. Each node takes the scheme minimizing its own
/// cost plus conversions from its already-assigned inputs.
///
/// In nodes are free and carry no preference of their own, so an In node
/// adopts the scheme of the first consumer that is processed.
pub fn bottom_up(circuit: &Circuit, profile: &CostProfile) -> OptimizeResult {
    let mut asg: Vec<Option<usize>> = vec![None; circuit.len()];
    for id in circuit.topological_order() {
        let node = &circuit.nodes()[id.0];
        if node.op == OpKind::In {
            continue;
        }
        let (best, _) = argmin(profile.support(node.op).into_iter().map(|s| {
            let own = profile.op_cents(node.op, s).expect("candidate supports op");
            let conversions = node.inputs.iter().map(|u| match asg[u.0] {
                Some(t) => profile.conversion_cents(t, s),
                // unassigned In: will follow this node
                None => (0.0, 0.0),
            });
            (s, pair_sum(std::iter::once(own).chain(conversions)))
        }))
        .expect("every op has a supporting scheme");
        asg[id.0] = Some(best);
        for u in &node.inputs {
            asg[u.0].get_or_insert(best);
        }
    }
    // Unused In nodes default to the first scheme.
    let indices: Vec<usize> = asg.into_iter().map(|s| s.unwrap_or(0)).collect();
    OptimizeResult::from_indices(circuit, profile, &indices, "bottom-up")
}

/// Assigns nodes consumers-first: each node takes the scheme minimizing its
/// own cost plus the conversions into every already-assigned consumer.
///
/// Out nodes are skipped and finally take their input's scheme.
pub fn top_down(circuit: &Circuit, profile: &CostProfile) -> OptimizeResult {
    let mut asg = vec![0usize; circuit.len()];
    let order = circuit.topological_order();
    for &id in order.iter().rev() {
        let node = &circuit.nodes()[id.0];
        if node.op == OpKind::Out {
            continue;
        }
        let consumers: Vec<usize> = circuit
            .consumers(id)
            .iter()
            .filter(|c| circuit.nodes()[c.0].op != OpKind::Out)
            .map(|c| c.0)
            .collect();
        let (best, _) = argmin(profile.support(node.op).into_iter().map(|s| {
            let own = profile.op_cents(node.op, s).expect("candidate supports op");
            let conversions = consumers
                .iter()
                .map(|&c| profile.conversion_cents(s, asg[c]));
            (s, pair_sum(std::iter::once(own).chain(conversions)))
        }))
        .expect("every op has a supporting scheme");
        asg[id.0] = best;
    }
    for &id in &order {
        let node = &circuit.nodes()[id.0];
        if node.op == OpKind::Out {
            asg[id.0] = asg[node.inputs[0].0];
        }
    }
    OptimizeResult::from_indices(circuit, profile, &asg, "top-down")
}
