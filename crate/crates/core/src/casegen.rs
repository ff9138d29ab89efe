//! Circuit generators: the biometric-matching and matrix-multiplication case
//! studies, sequential benchmarking chains, and seeded random DAGs.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{Circuit, CircuitBuilder, NodeId, OpKind, Party, DEFAULT_BITWIDTH};

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("{0} is not a binary operation")]
    NonBinaryOp(OpKind),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Squared-Euclidean nearest-row search of a client record against a server table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiometricSpec {
    pub rows: usize,
    pub attrs: usize,
    pub bitwidth: u32,
}

impl Default for BiometricSpec {
    fn default() -> Self {
        BiometricSpec {
            rows: 30,
            attrs: 5,
            bitwidth: DEFAULT_BITWIDTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatMulSpec {
    pub n: usize,
    pub bitwidth: u32,
}

impl Default for MatMulSpec {
    fn default() -> Self {
        MatMulSpec {
            n: 5,
            bitwidth: DEFAULT_BITWIDTH,
        }
    }
}

fn check_positive(what: &str, v: usize) -> Result<(), GenError> {
    if v == 0 {
        Err(GenError::InvalidParam(format!("{what} must be at least 1")))
    } else {
        Ok(())
    }
}

/// Node layout: server values `s[i][k]` row-major, client values `c[k]`,
/// row-index constants `idx[i]` (server), then per-row distances, then the
/// min/argmin fold. Outputs are `min_distance` followed by `argmin`.
///
/// The fold keeps the earlier row on equal distances.
pub fn gen_biometric(spec: &BiometricSpec) -> Result<Circuit, GenError> {
    check_positive("rows", spec.rows)?;
    check_positive("attrs", spec.attrs)?;
    let mut b = CircuitBuilder::new(spec.bitwidth);
    let server: Vec<Vec<NodeId>> = (0..spec.rows)
        .map(|i| {
            (0..spec.attrs)
                .map(|k| b.input(Party::Server, format!("s[{i}][{k}]")))
                .collect()
        })
        .collect();
    let client: Vec<NodeId> = (0..spec.attrs)
        .map(|k| b.input(Party::Client, format!("c[{k}]")))
        .collect();
    let index: Vec<NodeId> = (0..spec.rows)
        .map(|i| b.input(Party::Server, format!("idx[{i}]")))
        .collect();

    let distances: Vec<NodeId> = server
        .iter()
        .map(|row| {
            let squares: Vec<NodeId> = row
                .iter()
                .zip(&client)
                .map(|(&s, &c)| {
                    let d = b.op(OpKind::Sub, &[s, c]);
                    b.op(OpKind::Mul, &[d, d])
                })
                .collect();
            squares[1..]
                .iter()
                .fold(squares[0], |acc, &sq| b.op(OpKind::Add, &[acc, sq]))
        })
        .collect();

    let mut best = distances[0];
    let mut best_index = index[0];
    for (&d, &i) in distances.iter().zip(&index).skip(1) {
        let worse = b.op(OpKind::Ge, &[best, d]);
        best = b.op(OpKind::Mux, &[worse, d, best]);
        best_index = b.op(OpKind::Mux, &[worse, i, best_index]);
    }
    b.output(best, "min_distance");
    b.output(best_index, "argmin");
    Ok(b.finish().expect("generator emits a valid circuit"))
}

/// In-node values for a biometric circuit built from `spec`.
pub fn biometric_inputs(
    circuit: &Circuit,
    server: &[Vec<u64>],
    client: &[u64],
) -> BTreeMap<NodeId, u64> {
    let mut values = BTreeMap::new();
    for (i, row) in server.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            values.insert(named(circuit, &format!("s[{i}][{k}]")), v);
        }
        values.insert(named(circuit, &format!("idx[{i}]")), i as u64);
    }
    for (k, &v) in client.iter().enumerate() {
        values.insert(named(circuit, &format!("c[{k}]")), v);
    }
    values
}

/// Row-major `A` (server) then `B` (client); one output per product entry,
/// `C[i][j] = sum_k A[i][k] * B[k][j]`.
#[allow(clippy::needless_range_loop)]
pub fn gen_matmul(spec: &MatMulSpec) -> Result<Circuit, GenError> {
    check_positive("n", spec.n)?;
    let n = spec.n;
    let mut b = CircuitBuilder::new(spec.bitwidth);
    let a: Vec<Vec<NodeId>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| b.input(Party::Server, format!("a[{i}][{k}]")))
                .collect()
        })
        .collect();
    let bm: Vec<Vec<NodeId>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| b.input(Party::Client, format!("b[{k}][{j}]")))
                .collect()
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            let mut acc = b.op(OpKind::Mul, &[a[i][0], bm[0][j]]);
            for k in 1..n {
                let prod = b.op(OpKind::Mul, &[a[i][k], bm[k][j]]);
                acc = b.op(OpKind::Add, &[acc, prod]);
            }
            b.output(acc, format!("c[{i}][{j}]"));
        }
    }
    Ok(b.finish().expect("generator emits a valid circuit"))
}

pub fn matmul_inputs(circuit: &Circuit, a: &[Vec<u64>], bm: &[Vec<u64>]) -> BTreeMap<NodeId, u64> {
    let mut values = BTreeMap::new();
    for (i, row) in a.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            values.insert(named(circuit, &format!("a[{i}][{k}]")), v);
        }
    }
    for (k, row) in bm.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            values.insert(named(circuit, &format!("b[{k}][{j}]")), v);
        }
    }
    values
}

fn named(circuit: &Circuit, name: &str) -> NodeId {
    circuit
        .input_by_name(name)
        .unwrap_or_else(|| panic!("circuit has no input named {name}"))
}

/// `length` sequential applications of `op`, each consuming the previous
/// result and one fresh input.
pub fn gen_chain(op: OpKind, length: usize) -> Result<Circuit, GenError> {
    if !op.is_binary() {
        return Err(GenError::NonBinaryOp(op));
    }
    check_positive("length", length)?;
    let mut b = CircuitBuilder::default();
    let mut acc = b.input(Party::Server, "x[0]");
    for i in 1..=length {
        let fresh = b.input(
            if i % 2 == 0 {
                Party::Server
            } else {
                Party::Client
            },
            format!("x[{i}]"),
        );
        acc = b.op(op, &[acc, fresh]);
    }
    b.output(acc, "result");
    Ok(b.finish().expect("generator emits a valid circuit"))
}

/// Relative frequency of each operation in random circuits.
#[derive(Debug, Clone, PartialEq)]
pub struct OpWeights(Vec<(OpKind, u32)>);

impl OpWeights {
    pub fn new(weights: impl IntoIterator<Item = (OpKind, u32)>) -> Result<Self, GenError> {
        let weights: Vec<_> = weights.into_iter().collect();
        if let Some((op, _)) = weights.iter().find(|(op, _)| op.is_io()) {
            return Err(GenError::InvalidParam(format!("{op} cannot be weighted")));
        }
        if weights.iter().all(|(_, w)| *w == 0) {
            return Err(GenError::InvalidParam("all weights are zero".into()));
        }
        Ok(OpWeights(weights))
    }
}

impl Default for OpWeights {
    fn default() -> Self {
        OpWeights(OpKind::COMPUTE.iter().map(|&op| (op, 1)).collect())
    }
}

/// A reproducible random DAG with `n_ops` operation nodes. Inputs are drawn
/// uniformly from earlier non-Out nodes; every node left without a consumer
/// gets an Out node.
pub fn gen_random(seed: u64, n_ops: usize, weights: &OpWeights) -> Result<Circuit, GenError> {
    check_positive("n_ops", n_ops)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = WeightedIndex::new(weights.0.iter().map(|(_, w)| *w))
        .map_err(|e| GenError::InvalidParam(e.to_string()))?;
    let mut b = CircuitBuilder::default();
    let mut available: Vec<NodeId> = Vec::new();
    let n_inputs = rng.gen_range(1..=3.min(n_ops + 1));
    for i in 0..n_inputs {
        let party = if rng.gen_bool(0.5) {
            Party::Server
        } else {
            Party::Client
        };
        available.push(b.input(party, format!("x[{i}]")));
    }
    let mut consumed: Vec<bool> = vec![false; available.len()];
    let mut op_nodes = Vec::with_capacity(n_ops);
    for _ in 0..n_ops {
        let op = weights.0[pick.sample(&mut rng)].0;
        // Occasionally introduce a fresh input so circuits vary in width.
        if rng.gen_bool(0.15) {
            let i = available.len() - op_nodes.len();
            available.push(b.input(Party::Server, format!("x[{i}]")));
            consumed.push(false);
        }
        let inputs: Vec<NodeId> = (0..op.arity())
            .map(|_| available[rng.gen_range(0..available.len())])
            .collect();
        let id = b.op(op, &inputs);
        consumed.resize(id.0 + 1, false);
        for i in &inputs {
            consumed[i.0] = true;
        }
        available.push(id);
        op_nodes.push(id);
    }
    let sinks: Vec<NodeId> = op_nodes.into_iter().filter(|id| !consumed[id.0]).collect();
    for (k, id) in sinks.into_iter().enumerate() {
        b.output(id, format!("y[{k}]"));
    }
    Ok(b.finish().expect("generator emits a valid circuit"))
}
