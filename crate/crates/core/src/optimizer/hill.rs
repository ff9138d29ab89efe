//! Hill climbing from a uniform start.
//!
//! Sweeps visit every node and move it to the scheme with the lowest local
//! cost, only on strict improvement, until a sweep changes nothing.

use crate::circuit::{Circuit, NodeId};
use crate::cost_model::{indexed_total, CostProfile, ExactSum, Scheme};

use super::{
    argmin, pair_sum, require_support, resolve_scheme, OptimizeError, OptimizeResult, SolverLimits,
};

/// What a node minimizes when it reconsiders its scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HillObjective {
    /// Every total-cost term touching the node: own cost, conversions from
    /// inputs and conversions into consumers. The total never increases.
    #[default]
    TotalDelta,
    /// Own cost plus input conversions only, ignoring consumers. The total
    /// may increase and sweeps are not guaranteed to settle.
    NodeCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepOrder {
    /// Ascending node id, which is a topological order.
    #[default]
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HillOptions {
    pub objective: HillObjective,
    pub order: SweepOrder,
}

pub fn hill_climbing(
    circuit: &Circuit,
    profile: &CostProfile,
    start: &Scheme,
    limits: &SolverLimits,
) -> Result<OptimizeResult, OptimizeError> {
    hill_climbing_with(circuit, profile, start, limits, HillOptions::default())
}

pub fn hill_climbing_with(
    circuit: &Circuit,
    profile: &CostProfile,
    start: &Scheme,
    limits: &SolverLimits,
    options: HillOptions,
) -> Result<OptimizeResult, OptimizeError> {
    let s0 = resolve_scheme(profile, start)?;
    require_support(circuit, profile, s0)?;
    let max_passes = limits.passes_for(circuit, profile);

    let mut asg = vec![s0; circuit.len()];
    let mut scratch = ExactSum::new();
    let mut totals = vec![indexed_total(circuit, profile, &asg, &mut scratch)];
    let order: Vec<usize> = match options.order {
        SweepOrder::Forward => (0..circuit.len()).collect(),
        SweepOrder::Reverse => (0..circuit.len()).rev().collect(),
    };
    let supports: Vec<Vec<usize>> = circuit
        .nodes()
        .iter()
        .map(|n| profile.support(n.op))
        .collect();

    let mut passes = 0;
    let mut limit_exceeded = false;
    loop {
        let mut changed = false;
        for &v in &order {
            let local = |s: usize, asg: &[usize]| {
                local_cost(circuit, profile, asg, v, s, options.objective)
            };
            let current = local(asg[v], &asg);
            let (best, cost) = argmin(supports[v].iter().map(|&s| (s, local(s, &asg))))
                .expect("every op has a supporting scheme");
            if cost < current {
                asg[v] = best;
                changed = true;
            }
        }
        passes += 1;
        totals.push(indexed_total(circuit, profile, &asg, &mut scratch));
        if !changed {
            break;
        }
        if passes >= max_passes {
            limit_exceeded = true;
            break;
        }
    }

    let mut result = OptimizeResult::from_indices(circuit, profile, &asg, "hill-climbing");
    result.iterations = passes;
    result.limit_exceeded = limit_exceeded;
    result.sweep_totals = totals;
    Ok(result)
}

fn local_cost(
    circuit: &Circuit,
    profile: &CostProfile,
    asg: &[usize],
    v: usize,
    s: usize,
    objective: HillObjective,
) -> f64 {
    let node = &circuit.nodes()[v];
    let own = profile.op_cents(node.op, s).expect("candidate supports op");
    let inputs = node
        .inputs
        .iter()
        .map(|u| profile.conversion_cents(asg[u.0], s));
    let consumers: &[NodeId] = match objective {
        HillObjective::TotalDelta => circuit.consumers(NodeId(v)),
        HillObjective::NodeCost => &[],
    };
    let outputs = consumers
        .iter()
        .map(|c| profile.conversion_cents(s, asg[c.0]));
    pair_sum(std::iter::once(own).chain(inputs).chain(outputs))
}
