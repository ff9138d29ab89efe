//! Scheme-assignment heuristics and an exact solver.
//!
//! Every optimizer breaks ties by the profile's scheme order (arithmetic,
//! boolean, yao for the shipped profiles) and then by ascending node id, so
//! identical inputs always produce identical assignments.

mod exhaustive;
mod greedy;
mod hill;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, OpKind};
use crate::cost_model::{exact_sum, indexed_report, Assignment, CostProfile, CostReport, Scheme};

pub use exhaustive::{exhaustive_optimal, search_space};

pub use greedy::{bottom_up, top_down};
pub use hill::{hill_climbing, hill_climbing_with, HillObjective, HillOptions, SweepOrder};

pub const DEFAULT_MAX_SPACE: u64 = 10_000_000;

/// Search-space sizes saturate at `u128::MAX`.
pub fn format_space(space: u128) -> String {
    if space == u128::MAX {
        format!("more than {:.1e}", u128::MAX as f64)
    } else {
        space.to_string()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error("scheme {scheme} does not support {op}")]
    UnsupportedScheme { scheme: Scheme, op: OpKind },
    #[error("scheme \"{0}\" is not part of the profile")]
    UnknownScheme(String),
    #[error("search space of {} assignments exceeds the limit of {limit}", format_space(*space))]
    SearchSpaceTooLarge { space: u128, limit: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverLimits {
    /// Cap on the number of assignments the exhaustive solver may enumerate.
    pub max_space: u64,
    /// Cap on hill-climbing sweeps; `None` means nodes × schemes.
    pub max_passes: Option<usize>,
}

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits {
            max_space: DEFAULT_MAX_SPACE,
            max_passes: None,
        }
    }
}

impl SolverLimits {
    pub fn passes_for(&self, circuit: &Circuit, profile: &CostProfile) -> usize {
        self.max_passes
            .unwrap_or(circuit.len() * profile.schemes().len())
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeResult {
    pub heuristic: String,
    pub assignment: Assignment,
    pub report: CostReport,
    /// Hill-climbing sweeps; 1 for single-pass heuristics.
    pub iterations: usize,
    /// Set when hill climbing stopped at `max_passes` while still improving.
    pub limit_exceeded: bool,
    /// Hill climbing only: total after initialization, then after each sweep.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep_totals: Vec<f64>,
}

impl OptimizeResult {
    pub(crate) fn from_indices(
        circuit: &Circuit,
        profile: &CostProfile,
        indices: &[usize],
        heuristic: impl Into<String>,
    ) -> Self {
        OptimizeResult {
            heuristic: heuristic.into(),
            assignment: Assignment::from_indices(profile, indices),
            report: indexed_report(circuit, profile, indices),
            iterations: 1,
            limit_exceeded: false,
            sweep_totals: Vec::new(),
        }
    }
}

/// First candidate with the smallest cost; `None` if there are no candidates.
pub(crate) fn argmin(candidates: impl IntoIterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (s, cost) in candidates {
        if best.is_none_or(|(_, b)| cost < b) {
            best = Some((s, cost));
        }
    }
    best
}

/// Exact sum of `(compute, network)` pairs.
pub(crate) fn pair_sum(terms: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    exact_sum(terms.into_iter().flat_map(|(p, n)| [p, n]))
}

pub(crate) fn resolve_scheme(
    profile: &CostProfile,
    scheme: &Scheme,
) -> Result<usize, OptimizeError> {
    profile
        .scheme_index(scheme.as_str())
        .ok_or_else(|| OptimizeError::UnknownScheme(scheme.to_string()))
}

/// Checks `s` supports every operation in `circuit`.
pub(crate) fn require_support(
    circuit: &Circuit,
    profile: &CostProfile,
    s: usize,
) -> Result<(), OptimizeError> {
    match circuit.nodes().iter().find(|n| !profile.supports(n.op, s)) {
        Some(n) => Err(OptimizeError::UnsupportedScheme {
            scheme: profile.schemes()[s].clone(),
            op: n.op,
        }),
        None => Ok(()),
    }
}

/// Every node gets `scheme`.
pub fn fixed_sharing(
    circuit: &Circuit,
    profile: &CostProfile,
    scheme: &Scheme,
) -> Result<OptimizeResult, OptimizeError> {
    let s = resolve_scheme(profile, scheme)?;
    require_support(circuit, profile, s)?;
    Ok(OptimizeResult::from_indices(
        circuit,
        profile,
        &vec![s; circuit.len()],
        format!("pure-{scheme}"),
    ))
}

/// Scheme hill climbing starts from inside `best_of`: yao when it is
/// universal, otherwise the first universal scheme.
pub fn default_hill_start(profile: &CostProfile) -> usize {
    let universal = profile.universal_schemes();
    universal
        .iter()
        .copied()
        .find(|&s| profile.schemes()[s].as_str() == Scheme::YAO)
        .unwrap_or(universal[0])
}

/// Runs every heuristic and keeps the cheapest (earliest on ties).
///
/// Candidates, in order: fixed sharing for each universal scheme, bottom-up,
/// top-down, hill climbing from [`default_hill_start`].
pub fn best_of(circuit: &Circuit, profile: &CostProfile, limits: &SolverLimits) -> OptimizeResult {
    let mut candidates: Vec<OptimizeResult> = profile
        .universal_schemes()
        .into_iter()
        .map(|s| {
            fixed_sharing(circuit, profile, &profile.schemes()[s])
                .expect("universal scheme supports every op")
        })
        .collect();
    candidates.push(bottom_up(circuit, profile));
    candidates.push(top_down(circuit, profile));
    let start = profile.schemes()[default_hill_start(profile)].clone();
    candidates.push(
        hill_climbing(circuit, profile, &start, limits)
            .expect("universal scheme supports every op"),
    );

    let mut best = candidates.remove(0);
    for c in candidates {
        if c.report.total < best.report.total {
            best = c;
        }
    }
    best
}
