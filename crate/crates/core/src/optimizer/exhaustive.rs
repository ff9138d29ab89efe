//! Exact minimum-cost assignment by depth-first enumeration with bounding.
//!
//! Only operation nodes are enumerated. Once they are fixed, the best scheme
//! for every In and Out node follows directly: an Out node copies its input
//! (free), and an In node takes the scheme with the cheapest conversions into
//! its consumers. This keeps the result exact while the enumerated space is
//! the product of support-set sizes over operation nodes.

use crate::circuit::{Circuit, OpKind};
use crate::cost_model::{indexed_total, CostProfile, ExactSum};

use super::{argmin, pair_sum, OptimizeError, OptimizeResult, SolverLimits};

/// Relative slack on pruning so rounding in the running bound never discards
/// an optimal branch.
const PRUNE_SLACK: f64 = 1e-9;

/// Number of candidate assignments the exhaustive solver enumerates:
/// the product of support-set sizes over non-In/Out nodes.
pub fn search_space(circuit: &Circuit, profile: &CostProfile) -> u128 {
    circuit
        .nodes()
        .iter()
        .filter(|n| !n.op.is_io())
        .fold(1u128, |acc, n| {
            acc.saturating_mul(profile.support(n.op).len() as u128)
        })
}

struct Search<'a> {
    circuit: &'a Circuit,
    profile: &'a CostProfile,
    /// Operation nodes in ascending id order.
    ops: Vec<usize>,
    candidates: Vec<Vec<usize>>,
    /// Lower bound on the cost of `ops[k..]`.
    tail_bound: Vec<f64>,
    is_op: Vec<bool>,
    asg: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    scratch: ExactSum,
}

impl Search<'_> {
    fn op_node_cost(&self, v: usize, s: usize) -> f64 {
        let node = &self.circuit.nodes()[v];
        let own = self
            .profile
            .op_cents(node.op, s)
            .expect("candidate supports op");
        let conversions = node
            .inputs
            .iter()
            .filter(|u| self.is_op[u.0])
            .map(|u| self.profile.conversion_cents(self.asg[u.0], s));
        let (mut p, mut n) = own;
        for (cp, cn) in conversions {
            p += cp;
            n += cn;
        }
        p + n
    }

    fn best_total(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |(t, _)| *t)
    }

    fn descend(&mut self, k: usize, partial: f64) {
        if partial + self.tail_bound[k] > self.best_total() * (1.0 + PRUNE_SLACK) {
            return;
        }
        if k == self.ops.len() {
            self.complete();
            return;
        }
        let v = self.ops[k];
        for i in 0..self.candidates[k].len() {
            let s = self.candidates[k][i];
            self.asg[v] = s;
            let cost = self.op_node_cost(v, s);
            self.descend(k + 1, partial + cost);
        }
    }

    /// Fill In/Out nodes optimally and score the full assignment exactly.
    fn complete(&mut self) {
        let circuit = self.circuit;
        let profile = self.profile;
        for node in circuit.nodes() {
            match node.op {
                OpKind::In => {
                    let consumers: Vec<usize> = circuit
                        .consumers(node.id)
                        .iter()
                        .filter(|c| self.is_op[c.0])
                        .map(|c| self.asg[c.0])
                        .collect();
                    let (s, _) = argmin((0..profile.schemes().len()).map(|s| {
                        (
                            s,
                            pair_sum(consumers.iter().map(|&t| profile.conversion_cents(s, t))),
                        )
                    }))
                    .expect("profile has schemes");
                    self.asg[node.id.0] = s;
                }
                OpKind::Out => self.asg[node.id.0] = self.asg[node.inputs[0].0],
                _ => {}
            }
        }
        let total = indexed_total(circuit, profile, &self.asg, &mut self.scratch);
        if total < self.best_total() {
            self.best = Some((total, self.asg.clone()));
        }
    }
}

/// Minimum-cost assignment. Among optimal assignments of the operation nodes,
/// the lexicographically first (ascending ids, profile scheme order) wins.
pub fn exhaustive_optimal(
    circuit: &Circuit,
    profile: &CostProfile,
    limits: &SolverLimits,
) -> Result<OptimizeResult, OptimizeError> {
    let space = search_space(circuit, profile);
    if space > u128::from(limits.max_space) {
        return Err(OptimizeError::SearchSpaceTooLarge {
            space,
            limit: limits.max_space,
        });
    }
    let ops: Vec<usize> = circuit
        .nodes()
        .iter()
        .filter(|n| !n.op.is_io())
        .map(|n| n.id.0)
        .collect();
    let candidates: Vec<Vec<usize>> = ops
        .iter()
        .map(|&v| profile.support(circuit.nodes()[v].op))
        .collect();
    let mut tail_bound = vec![0.0; ops.len() + 1];
    for k in (0..ops.len()).rev() {
        let op = circuit.nodes()[ops[k]].op;
        let cheapest = candidates[k]
            .iter()
            .map(|&s| {
                let (p, n) = profile.op_cents(op, s).expect("candidate supports op");
                p + n
            })
            .fold(f64::INFINITY, f64::min);
        tail_bound[k] = tail_bound[k + 1] + cheapest;
    }
    let mut is_op = vec![false; circuit.len()];
    for &v in &ops {
        is_op[v] = true;
    }

    let mut search = Search {
        circuit,
        profile,
        ops,
        candidates,
        tail_bound,
        is_op,
        asg: vec![0; circuit.len()],
        best: None,
        scratch: ExactSum::new(),
    };
    search.descend(0, 0.0);
    let (_, asg) = search.best.expect("at least one feasible assignment");
    Ok(OptimizeResult::from_indices(
        circuit,
        profile,
        &asg,
        "exhaustive",
    ))
}
