//! Monetary cost of executing a circuit under a sharing assignment.
//!
//! A node pays its own compute and network cost under its scheme, plus one
//! conversion per input edge whose producer uses a different scheme.
//! In and Out nodes have no execution cost.

mod derive;
mod profile;
mod sum;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, NodeId, OpKind};

pub use derive::{derive_profile, DeriveError, MeasuredItem, PriceSpec, RawMeasurement};
pub use profile::{
    load_profile, save_profile, shipped_profile, shipped_profiles, CostProfile, ProfileError,
    Scheme, UnitCost, SHIPPED,
};
pub use sum::{exact_sum, ExactSum};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("node {node}: {op} is not supported by scheme {scheme}")]
    InfeasibleAssignment {
        node: NodeId,
        op: OpKind,
        scheme: Scheme,
    },
    #[error("node {0} has no scheme assigned")]
    Unassigned(NodeId),
    #[error("node {node}: scheme \"{scheme}\" is not part of the profile")]
    UnknownScheme { node: NodeId, scheme: Scheme },
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
}

/// Node → scheme map.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<NodeId, Scheme>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn uniform(circuit: &Circuit, scheme: &Scheme) -> Self {
        Assignment(
            circuit
                .nodes()
                .iter()
                .map(|n| (n.id, scheme.clone()))
                .collect(),
        )
    }

    pub fn get(&self, id: NodeId) -> Option<&Scheme> {
        self.0.get(&id)
    }

    pub fn set(&mut self, id: NodeId, scheme: Scheme) {
        self.0.insert(id, scheme);
    }

    pub fn remove(&mut self, id: NodeId) -> Option<Scheme> {
        self.0.remove(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Scheme)> {
        self.0.iter().map(|(&k, v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Canonical JSON (`{"0":"arithmetic",...}`, ascending ids).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("assignment serializes")
    }

    pub(crate) fn from_indices(profile: &CostProfile, indices: &[usize]) -> Self {
        Assignment(
            indices
                .iter()
                .enumerate()
                .map(|(i, &s)| (NodeId(i), profile.schemes()[s].clone()))
                .collect(),
        )
    }

    fn index_of(&self, id: NodeId, profile: &CostProfile) -> Result<usize, CostError> {
        let scheme = self.get(id).ok_or(CostError::Unassigned(id))?;
        profile
            .scheme_index(scheme.as_str())
            .ok_or_else(|| CostError::UnknownScheme {
                node: id,
                scheme: scheme.clone(),
            })
    }
}

/// Per-node cost breakdown in cents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCost {
    pub id: NodeId,
    pub op_compute: f64,
    pub op_network: f64,
    pub conv_compute: f64,
    pub conv_network: f64,
}

impl NodeCost {
    pub fn total(&self) -> f64 {
        exact_sum([
            self.op_compute,
            self.op_network,
            self.conv_compute,
            self.conv_network,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub per_node: Vec<NodeCost>,
    pub total_compute: f64,
    pub total_network: f64,
    pub total: f64,
}

impl CostReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    Unassigned,
    UnknownScheme(Scheme),
    Unsupported { op: OpKind, scheme: Scheme },
    UnknownNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityIssue {
    pub node: NodeId,
    pub violation: Violation,
}

/// Calls `visit(compute, network)` for every cost term of `node`: its own
/// execution cost, then one conversion per input edge.
#[inline]
fn for_each_term(
    circuit: &Circuit,
    profile: &CostProfile,
    asg: &[usize],
    node: usize,
    mut visit: impl FnMut(bool, f64, f64),
) {
    let n = &circuit.nodes()[node];
    let s = asg[node];
    let (p, net) = profile
        .op_cents(n.op, s)
        .expect("assignment checked for feasibility");
    visit(false, p, net);
    for input in &n.inputs {
        let (cp, cn) = profile.conversion_cents(asg[input.0], s);
        visit(true, cp, cn);
    }
}

fn node_record(circuit: &Circuit, profile: &CostProfile, asg: &[usize], node: usize) -> NodeCost {
    let mut rec = NodeCost {
        id: NodeId(node),
        op_compute: 0.0,
        op_network: 0.0,
        conv_compute: 0.0,
        conv_network: 0.0,
    };
    let (mut cc, mut cn) = (ExactSum::new(), ExactSum::new());
    for_each_term(circuit, profile, asg, node, |is_conv, p, n| {
        if is_conv {
            cc.add(p);
            cn.add(n);
        } else {
            rec.op_compute = p;
            rec.op_network = n;
        }
    });
    rec.conv_compute = cc.value();
    rec.conv_network = cn.value();
    rec
}

/// Exact total of a feasible index assignment; `acc` is scratch space.
pub(crate) fn indexed_total(
    circuit: &Circuit,
    profile: &CostProfile,
    asg: &[usize],
    acc: &mut ExactSum,
) -> f64 {
    acc.clear();
    for node in 0..circuit.len() {
        for_each_term(circuit, profile, asg, node, |_, p, n| {
            acc.add(p);
            acc.add(n);
        });
    }
    acc.value()
}

pub(crate) fn indexed_report(
    circuit: &Circuit,
    profile: &CostProfile,
    asg: &[usize],
) -> CostReport {
    let (mut compute, mut network, mut total) = (ExactSum::new(), ExactSum::new(), ExactSum::new());
    let mut per_node = Vec::with_capacity(circuit.len());
    for node in 0..circuit.len() {
        for_each_term(circuit, profile, asg, node, |_, p, n| {
            compute.add(p);
            network.add(n);
            total.add(p);
            total.add(n);
        });
        per_node.push(node_record(circuit, profile, asg, node));
    }
    CostReport {
        per_node,
        total_compute: compute.value(),
        total_network: network.value(),
        total: total.value(),
    }
}

fn check_node(
    circuit: &Circuit,
    profile: &CostProfile,
    asg: &Assignment,
    id: NodeId,
) -> Result<usize, CostError> {
    let node = circuit.node(id).ok_or(CostError::UnknownNode(id))?;
    let s = asg.index_of(id, profile)?;
    if !profile.supports(node.op, s) {
        return Err(CostError::InfeasibleAssignment {
            node: id,
            op: node.op,
            scheme: profile.schemes()[s].clone(),
        });
    }
    Ok(s)
}

/// Cost of a single node under `asg`.
pub fn node_cost(
    circuit: &Circuit,
    node: NodeId,
    asg: &Assignment,
    profile: &CostProfile,
) -> Result<NodeCost, CostError> {
    let s = check_node(circuit, profile, asg, node)?;
    let n = &circuit.nodes()[node.0];
    // Only the node and its producers matter; everything else stays at 0.
    let mut indices = vec![0; circuit.len()];
    indices[node.0] = s;
    for input in &n.inputs {
        indices[input.0] = asg.index_of(*input, profile)?;
    }
    Ok(node_record(circuit, profile, &indices, node.0))
}

pub fn total_cost(
    circuit: &Circuit,
    asg: &Assignment,
    profile: &CostProfile,
) -> Result<CostReport, CostError> {
    let indices = circuit
        .nodes()
        .iter()
        .map(|n| check_node(circuit, profile, asg, n.id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(indexed_report(circuit, profile, &indices))
}

/// All reasons `asg` is not a feasible assignment for `circuit`; empty when feasible.
pub fn check_feasible(
    circuit: &Circuit,
    asg: &Assignment,
    profile: &CostProfile,
) -> Vec<FeasibilityIssue> {
    let mut issues = Vec::new();
    for node in circuit.nodes() {
        let violation = match asg.get(node.id) {
            None => Some(Violation::Unassigned),
            Some(scheme) => match profile.scheme_index(scheme.as_str()) {
                None => Some(Violation::UnknownScheme(scheme.clone())),
                Some(s) if !profile.supports(node.op, s) => Some(Violation::Unsupported {
                    op: node.op,
                    scheme: scheme.clone(),
                }),
                Some(_) => None,
            },
        };
        if let Some(violation) = violation {
            issues.push(FeasibilityIssue {
                node: node.id,
                violation,
            });
        }
    }
    for (id, _) in asg.iter().filter(|(id, _)| id.0 >= circuit.len()) {
        issues.push(FeasibilityIssue {
            node: id,
            violation: Violation::UnknownNode,
        });
    }
    issues
}
