//! Word-level circuit IR: a DAG of atomic operations stored in topological order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BITWIDTH: u32 = 32;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("node {node}: {op} takes {expected} inputs, got {got}")]
    ArityMismatch {
        node: NodeId,
        op: OpKind,
        expected: usize,
        got: usize,
    },
    #[error("node {node}: input {input} is not a previously defined node")]
    DanglingInput { node: NodeId, input: NodeId },
    #[error("node {node}: input {input} is an out node")]
    OutAsInput { node: NodeId, input: NodeId },
    #[error("node {node} lies on a cycle")]
    CycleDetected { node: NodeId },
    #[error("node {node}: party label is only allowed on in nodes")]
    UnexpectedParty { node: NodeId },
    #[error("node at position {position} has id {id}; ids must be dense and ascending")]
    IdMismatch { position: usize, id: NodeId },
    #[error("circuit has no {0} node")]
    NotRunnable(OpKind),
    #[error("bitwidth must be in 1..=64, got {0}")]
    InvalidBitwidth(u32),
    #[error("no value supplied for in node {0}")]
    MissingInput(NodeId),
    #[error("value {value} for node {node} does not fit in {bitwidth} bits")]
    ValueOutOfRange {
        node: NodeId,
        value: u64,
        bitwidth: u32,
    },
    #[error("node {0} is not an in node")]
    NotAnInput(NodeId),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Atomic operations. `In` and `Out` mark circuit inputs and outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    And,
    Xor,
    Mux,
    Eq,
    Ge,
    In,
    Out,
}

impl OpKind {
    pub const ALL: [OpKind; 10] = [
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::And,
        OpKind::Xor,
        OpKind::Mux,
        OpKind::Eq,
        OpKind::Ge,
        OpKind::In,
        OpKind::Out,
    ];

    /// Operations that carry a price in a cost profile.
    pub const COMPUTE: [OpKind; 8] = [
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::And,
        OpKind::Xor,
        OpKind::Mux,
        OpKind::Eq,
        OpKind::Ge,
    ];

    pub fn arity(self) -> usize {
        match self {
            OpKind::In => 0,
            OpKind::Out => 1,
            OpKind::Mux => 3,
            _ => 2,
        }
    }

    pub fn is_binary(self) -> bool {
        self.arity() == 2
    }

    /// True for In/Out, which are free and supported by every scheme.
    pub fn is_io(self) -> bool {
        matches!(self, OpKind::In | OpKind::Out)
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::And => "and",
            OpKind::Xor => "xor",
            OpKind::Mux => "mux",
            OpKind::Eq => "eq",
            OpKind::Ge => "ge",
            OpKind::In => "in",
            OpKind::Out => "out",
        }
    }

    /// Index into [`OpKind::COMPUTE`]; `None` for In/Out.
    pub(crate) fn compute_index(self) -> Option<usize> {
        OpKind::COMPUTE.iter().position(|&op| op == self)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OpKind {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| CircuitError::Parse(format!("unknown op \"{s}\"")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Server,
    Client,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub op: OpKind,
    pub inputs: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub party: Option<Party>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// Node description handed to [`Circuit::build`]; ids are assigned in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub op: OpKind,
    pub inputs: Vec<NodeId>,
    pub party: Option<Party>,
    pub name: Option<String>,
}

impl NodeSpec {
    pub fn new(op: OpKind, inputs: impl IntoIterator<Item = usize>) -> Self {
        NodeSpec {
            op,
            inputs: inputs.into_iter().map(NodeId).collect(),
            party: None,
            name: None,
        }
    }
}

/// A validated circuit. Nodes are stored in a valid topological order and are
/// immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    bitwidth: u32,
    nodes: Vec<Node>,
    consumers: Vec<Vec<NodeId>>,
}

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    bitwidth: u32,
    nodes: Vec<Node>,
}

impl Circuit {
    pub fn build(
        bitwidth: u32,
        specs: impl IntoIterator<Item = NodeSpec>,
    ) -> Result<Circuit, CircuitError> {
        let nodes = specs
            .into_iter()
            .enumerate()
            .map(|(i, s)| Node {
                id: NodeId(i),
                op: s.op,
                inputs: s.inputs,
                party: s.party,
                name: s.name,
            })
            .collect();
        Circuit::from_nodes(bitwidth, nodes)
    }

    /// Validates an explicit node list (ids must already be dense and ascending).
    pub fn from_nodes(bitwidth: u32, nodes: Vec<Node>) -> Result<Circuit, CircuitError> {
        if bitwidth == 0 || bitwidth > 64 {
            return Err(CircuitError::InvalidBitwidth(bitwidth));
        }
        let mut consumers = vec![Vec::new(); nodes.len()];
        for (position, node) in nodes.iter().enumerate() {
            if node.id.0 != position {
                return Err(CircuitError::IdMismatch {
                    position,
                    id: node.id,
                });
            }
            if node.inputs.len() != node.op.arity() {
                return Err(CircuitError::ArityMismatch {
                    node: node.id,
                    op: node.op,
                    expected: node.op.arity(),
                    got: node.inputs.len(),
                });
            }
            if node.party.is_some() && node.op != OpKind::In {
                return Err(CircuitError::UnexpectedParty { node: node.id });
            }
            if let Some(&input) = node.inputs.iter().find(|i| i.0 >= nodes.len()) {
                return Err(CircuitError::DanglingInput {
                    node: node.id,
                    input,
                });
            }
            for &input in &node.inputs {
                if input.0 >= position {
                    if reaches(&nodes, input, node.id) {
                        return Err(CircuitError::CycleDetected { node: node.id });
                    }
                    return Err(CircuitError::DanglingInput {
                        node: node.id,
                        input,
                    });
                }
                if nodes[input.0].op == OpKind::Out {
                    return Err(CircuitError::OutAsInput {
                        node: node.id,
                        input,
                    });
                }
                consumers[input.0].push(node.id);
            }
        }
        for required in [OpKind::In, OpKind::Out] {
            if !nodes.iter().any(|n| n.op == required) {
                return Err(CircuitError::NotRunnable(required));
            }
        }
        Ok(Circuit {
            bitwidth,
            nodes,
            consumers,
        })
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Consumers of `id`, one entry per consuming edge (a node reading `id`
    /// twice appears twice).
    pub fn consumers(&self, id: NodeId) -> &[NodeId] {
        &self.consumers[id.0]
    }

    pub fn count(&self, op: OpKind) -> usize {
        self.nodes.iter().filter(|n| n.op == op).count()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.op == OpKind::In)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.op == OpKind::Out)
    }

    /// Kahn's algorithm, smallest ready id first.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let mut pending: Vec<usize> = self.nodes.iter().map(|n| n.inputs.len()).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = pending
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(i)) = ready.pop() {
            order.push(NodeId(i));
            for c in &self.consumers[i] {
                pending[c.0] -= 1;
                if pending[c.0] == 0 {
                    ready.push(Reverse(c.0));
                }
            }
        }
        order
    }

    /// Longest path, counted in non-In/Out nodes.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for node in &self.nodes {
            let below = node.inputs.iter().map(|i| depth[i.0]).max().unwrap_or(0);
            depth[node.id.0] = below + usize::from(!node.op.is_io());
        }
        depth.into_iter().max().unwrap_or(0)
    }

    fn mask(&self) -> u64 {
        if self.bitwidth == 64 {
            u64::MAX
        } else {
            (1u64 << self.bitwidth) - 1
        }
    }

    /// Evaluates the circuit in the clear over Z_{2^bitwidth}.
    pub fn evaluate_plaintext(
        &self,
        inputs: &BTreeMap<NodeId, u64>,
    ) -> Result<BTreeMap<NodeId, u64>, CircuitError> {
        let mask = self.mask();
        for (&id, &value) in inputs {
            match self.node(id) {
                Some(n) if n.op == OpKind::In => {}
                _ => return Err(CircuitError::NotAnInput(id)),
            }
            if value & !mask != 0 {
                return Err(CircuitError::ValueOutOfRange {
                    node: id,
                    value,
                    bitwidth: self.bitwidth,
                });
            }
        }
        let mut values = vec![0u64; self.nodes.len()];
        let mut outputs = BTreeMap::new();
        for node in &self.nodes {
            let arg = |k: usize| values[node.inputs[k].0];
            let v = match node.op {
                OpKind::In => *inputs
                    .get(&node.id)
                    .ok_or(CircuitError::MissingInput(node.id))?,
                OpKind::Add => arg(0).wrapping_add(arg(1)),
                OpKind::Sub => arg(0).wrapping_sub(arg(1)),
                OpKind::Mul => arg(0).wrapping_mul(arg(1)),
                OpKind::And => arg(0) & arg(1),
                OpKind::Xor => arg(0) ^ arg(1),
                OpKind::Eq => u64::from(arg(0) == arg(1)),
                OpKind::Ge => u64::from(arg(0) > arg(1)),
                OpKind::Mux => {
                    if arg(0) != 0 {
                        arg(1)
                    } else {
                        arg(2)
                    }
                }
                OpKind::Out => {
                    let v = arg(0);
                    outputs.insert(node.id, v);
                    v
                }
            } & mask;
            values[node.id.0] = v;
        }
        Ok(outputs)
    }

    /// Look up an In node by its name label.
    pub fn input_by_name(&self, name: &str) -> Option<NodeId> {
        self.inputs()
            .find(|n| n.name.as_deref() == Some(name))
            .map(|n| n.id)
    }

    pub fn to_json(&self) -> String {
        let file = CircuitFile {
            bitwidth: self.bitwidth,
            nodes: self.nodes.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("circuit serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Circuit, CircuitError> {
        let file: CircuitFile =
            serde_json::from_str(text).map_err(|e| CircuitError::Parse(e.to_string()))?;
        Circuit::from_nodes(file.bitwidth, file.nodes)
    }
}

/// Whether following input edges from `from` arrives at `target`.
fn reaches(nodes: &[Node], from: NodeId, target: NodeId) -> bool {
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![from];
    while let Some(id) = stack.pop() {
        if id == target {
            return true;
        }
        if id.0 >= nodes.len() || std::mem::replace(&mut seen[id.0], true) {
            continue;
        }
        stack.extend(nodes[id.0].inputs.iter().copied());
    }
    false
}

pub fn load_circuit(path: impl AsRef<Path>) -> Result<Circuit, CircuitError> {
    Circuit::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_circuit(circuit: &Circuit, path: impl AsRef<Path>) -> Result<(), CircuitError> {
    std::fs::write(path, circuit.to_json())?;
    Ok(())
}

/// Incremental construction helper used by the generators.
#[derive(Debug)]
pub struct CircuitBuilder {
    bitwidth: u32,
    specs: Vec<NodeSpec>,
}

impl Default for CircuitBuilder {
    fn default() -> Self {
        CircuitBuilder::new(DEFAULT_BITWIDTH)
    }
}

impl CircuitBuilder {
    pub fn new(bitwidth: u32) -> Self {
        CircuitBuilder {
            bitwidth,
            specs: Vec::new(),
        }
    }

    pub fn push(&mut self, spec: NodeSpec) -> NodeId {
        self.specs.push(spec);
        NodeId(self.specs.len() - 1)
    }

    pub fn input(&mut self, party: Party, name: impl Into<String>) -> NodeId {
        self.push(NodeSpec {
            op: OpKind::In,
            inputs: Vec::new(),
            party: Some(party),
            name: Some(name.into()),
        })
    }

    pub fn op(&mut self, op: OpKind, inputs: &[NodeId]) -> NodeId {
        self.push(NodeSpec {
            op,
            inputs: inputs.to_vec(),
            party: None,
            name: None,
        })
    }

    pub fn output(&mut self, input: NodeId, name: impl Into<String>) -> NodeId {
        self.push(NodeSpec {
            op: OpKind::Out,
            inputs: vec![input],
            party: None,
            name: Some(name.into()),
        })
    }

    pub fn finish(self) -> Result<Circuit, CircuitError> {
        Circuit::build(self.bitwidth, self.specs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adder() -> Circuit {
        Circuit::build(
            32,
            [
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::Add, [0, 1]),
                NodeSpec::new(OpKind::Out, [2]),
            ],
        )
        .unwrap()
    }

    fn binary(op: OpKind) -> Circuit {
        Circuit::build(
            32,
            [
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(op, [0, 1]),
                NodeSpec::new(OpKind::Out, [2]),
            ],
        )
        .unwrap()
    }

    fn eval2(c: &Circuit, a: u64, b: u64) -> u64 {
        let inputs = BTreeMap::from([(NodeId(0), a), (NodeId(1), b)]);
        let out = c.evaluate_plaintext(&inputs).unwrap();
        *out.values().next().unwrap()
    }

    #[test]
    fn builds_minimal_adder() {
        let c = adder();
        assert_eq!(c.len(), 4);
        assert_eq!(c.consumers(NodeId(0)), &[NodeId(2)]);
    }

    #[test]
    fn self_pairing_is_allowed() {
        let c = Circuit::build(
            32,
            [
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::Add, [0, 0]),
                NodeSpec::new(OpKind::Out, [1]),
            ],
        )
        .unwrap();
        assert_eq!(c.consumers(NodeId(0)), &[NodeId(1), NodeId(1)]);
    }

    #[test]
    fn rejects_dangling_input() {
        let err = Circuit::build(32, [NodeSpec::new(OpKind::Add, [0, 1])]).unwrap_err();
        assert!(matches!(err, CircuitError::DanglingInput { .. }));
        let err = Circuit::build(
            32,
            [
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::Add, [0, 2]),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, CircuitError::DanglingInput { .. }));
    }

    #[test]
    fn rejects_bad_structure() {
        let err = Circuit::build(
            32,
            [
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::Add, [0]),
            ],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            CircuitError::ArityMismatch {
                expected: 2,
                got: 1,
                ..
            }
        ));

        let err = Circuit::build(
            32,
            [
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::Out, [0]),
                NodeSpec::new(OpKind::Add, [0, 1]),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, CircuitError::OutAsInput { .. }));

        let err = Circuit::build(
            32,
            [
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::Add, [0, 1]),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, CircuitError::CycleDetected { .. }));

        let mut with_party = NodeSpec::new(OpKind::Out, [0]);
        with_party.party = Some(Party::Client);
        let err = Circuit::build(32, [NodeSpec::new(OpKind::In, []), with_party]).unwrap_err();
        assert!(matches!(err, CircuitError::UnexpectedParty { .. }));

        let err = Circuit::build(32, [NodeSpec::new(OpKind::In, [])]).unwrap_err();
        assert!(matches!(err, CircuitError::NotRunnable(OpKind::Out)));
    }

    #[test]
    fn topological_order_of_diamond() {
        let c = Circuit::build(
            32,
            [
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::Add, [0, 1]),
                NodeSpec::new(OpKind::Mul, [0, 1]),
                NodeSpec::new(OpKind::Sub, [2, 3]),
                NodeSpec::new(OpKind::Out, [4]),
            ],
        )
        .unwrap();
        assert_eq!(
            c.topological_order(),
            (0..6).map(NodeId).collect::<Vec<_>>()
        );
        assert_eq!(
            adder().topological_order(),
            (0..4).map(NodeId).collect::<Vec<_>>()
        );
    }

    #[test]
    fn plaintext_semantics() {
        assert_eq!(eval2(&adder(), 7, 5), 12);
        assert_eq!(eval2(&binary(OpKind::Sub), 0, 1), (1u64 << 32) - 1);
        assert_eq!(eval2(&binary(OpKind::Mul), 1 << 31, 2), 0);
        assert_eq!(eval2(&binary(OpKind::Ge), 5, 5), 0);
        assert_eq!(eval2(&binary(OpKind::Ge), 6, 5), 1);
        assert_eq!(eval2(&binary(OpKind::Eq), 5, 5), 1);
        assert_eq!(eval2(&binary(OpKind::And), 0b1100, 0b1010), 0b1000);
        assert_eq!(eval2(&binary(OpKind::Xor), 0b1100, 0b1010), 0b0110);

        let mux = Circuit::build(
            32,
            [
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::Mux, [0, 1, 2]),
                NodeSpec::new(OpKind::Out, [3]),
            ],
        )
        .unwrap();
        let run = |sel| {
            let inputs = BTreeMap::from([(NodeId(0), sel), (NodeId(1), 10), (NodeId(2), 20)]);
            mux.evaluate_plaintext(&inputs).unwrap()[&NodeId(4)]
        };
        assert_eq!(run(1), 10);
        assert_eq!(run(7), 10);
        assert_eq!(run(0), 20);
    }

    #[test]
    fn evaluation_errors() {
        let c = adder();
        let err = c
            .evaluate_plaintext(&BTreeMap::from([(NodeId(0), 1)]))
            .unwrap_err();
        assert!(matches!(err, CircuitError::MissingInput(NodeId(1))));
        let err = c
            .evaluate_plaintext(&BTreeMap::from([(NodeId(0), 1 << 32), (NodeId(1), 0)]))
            .unwrap_err();
        assert!(matches!(err, CircuitError::ValueOutOfRange { .. }));
    }

    #[test]
    fn bitwidth_64_wraps() {
        let c = Circuit::build(
            64,
            [
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::In, []),
                NodeSpec::new(OpKind::Add, [0, 1]),
                NodeSpec::new(OpKind::Out, [2]),
            ],
        )
        .unwrap();
        assert_eq!(eval2(&c, u64::MAX, 2), 1);
    }

    #[test]
    fn json_format() {
        let text = r#"{"bitwidth":32,"nodes":[{"id":0,"op":"in","inputs":[],"party":"client"},{"id":1,"op":"in","inputs":[],"party":"server"},{"id":2,"op":"add","inputs":[0,1]},{"id":3,"op":"out","inputs":[2]}]}"#;
        let c = Circuit::from_json(text).unwrap();
        assert_eq!(c.nodes()[0].party, Some(Party::Client));
        assert_eq!(Circuit::from_json(&c.to_json()).unwrap(), c);

        let bad = r#"{"bitwidth":32,"nodes":[{"id":0,"op":"in","inputs":[]},{"id":1,"op":"in","inputs":[]},{"id":2,"op":"add","inputs":[0,1,1]},{"id":3,"op":"out","inputs":[2]}]}"#;
        assert!(matches!(
            Circuit::from_json(bad).unwrap_err(),
            CircuitError::ArityMismatch { got: 3, .. }
        ));

        let unknown = r#"{"bitwidth":32,"nodes":[{"id":0,"op":"div","inputs":[]}]}"#;
        match Circuit::from_json(unknown).unwrap_err() {
            CircuitError::Parse(msg) => assert!(msg.contains("div"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }

        let gap = r#"{"bitwidth":32,"nodes":[{"id":1,"op":"in","inputs":[]}]}"#;
        assert!(matches!(
            Circuit::from_json(gap).unwrap_err(),
            CircuitError::IdMismatch { .. }
        ));
    }

    #[test]
    fn op_names_round_trip() {
        for op in OpKind::ALL {
            assert_eq!(op.name().parse::<OpKind>().unwrap(), op);
        }
    }
}
