use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::OpKind;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("negative cost for {0}")]
    NegativeCost(String),
    #[error("missing conversion {from}->{to}")]
    MissingConversion { from: Scheme, to: Scheme },
    #[error("no scheme supports every operation")]
    NoUniversalScheme,
    #[error("scheme \"{0}\" listed twice")]
    DuplicateScheme(Scheme),
    #[error("unknown scheme \"{0}\"")]
    UnknownScheme(String),
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("\"{0}\" is priced implicitly and may not appear in a profile")]
    ImplicitOp(OpKind),
    #[error("no shipped profile named \"{0}\"")]
    UnknownProfile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identifier of a sharing scheme, e.g. `arithmetic`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scheme(String);

impl Scheme {
    pub const ARITHMETIC: &'static str = "arithmetic";
    pub const BOOLEAN: &'static str = "boolean";
    pub const YAO: &'static str = "yao";

    pub fn new(id: impl Into<String>) -> Self {
        Scheme(id.into())
    }

    pub fn arithmetic() -> Self {
        Scheme::new(Self::ARITHMETIC)
    }

    pub fn boolean() -> Self {
        Scheme::new(Self::BOOLEAN)
    }

    pub fn yao() -> Self {
        Scheme::new(Self::YAO)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Scheme {
    fn from(s: &str) -> Self {
        Scheme::new(s)
    }
}

/// Compute (`p`) and network (`n`) cost, in a profile's stored units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UnitCost {
    pub p: f64,
    pub n: f64,
}

impl UnitCost {
    pub const ZERO: UnitCost = UnitCost { p: 0.0, n: 0.0 };

    pub fn new(p: f64, n: f64) -> Self {
        UnitCost { p, n }
    }

    fn validate(&self, what: impl FnOnce() -> String) -> Result<(), ProfileError> {
        // NaN fails both comparisons and is rejected too.
        if self.p >= 0.0 && self.n >= 0.0 && self.p.is_finite() && self.n.is_finite() {
            Ok(())
        } else {
            Err(ProfileError::NegativeCost(what()))
        }
    }
}

/// Unit costs for one deployment: per-(op, scheme) execution cost and
/// per-(scheme, scheme) conversion cost. Stored numbers times `scale` give cents.
///
/// Schemes are addressed by their position in [`CostProfile::schemes`]; that
/// order is also the tie-break order used by every optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct CostProfile {
    name: String,
    scale: f64,
    schemes: Vec<Scheme>,
    /// `[compute op][scheme]`, stored units; `None` = unsupported.
    ops: Vec<Vec<Option<UnitCost>>>,
    /// `[from][to]`, stored units; diagonal is zero.
    conversions: Vec<Vec<UnitCost>>,
    ops_cents: Vec<Vec<Option<(f64, f64)>>>,
    conv_cents: Vec<Vec<(f64, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    name: String,
    scale: f64,
    schemes: Vec<Scheme>,
    ops: BTreeMap<OpKind, BTreeMap<Scheme, UnitCost>>,
    conversions: BTreeMap<String, UnitCost>,
}

fn conversion_key(from: &Scheme, to: &Scheme) -> String {
    format!("{from}->{to}")
}

impl CostProfile {
    pub fn new(
        name: impl Into<String>,
        scale: f64,
        schemes: Vec<Scheme>,
        op_costs: BTreeMap<(OpKind, Scheme), UnitCost>,
        conversions: BTreeMap<(Scheme, Scheme), UnitCost>,
    ) -> Result<CostProfile, ProfileError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(ProfileError::InvalidScale(scale));
        }
        let mut seen = BTreeSet::new();
        for s in &schemes {
            if !seen.insert(s) {
                return Err(ProfileError::DuplicateScheme(s.clone()));
            }
        }
        let index = |s: &Scheme| {
            schemes
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| ProfileError::UnknownScheme(s.to_string()))
        };

        let mut ops = vec![vec![None; schemes.len()]; OpKind::COMPUTE.len()];
        for ((op, scheme), cost) in &op_costs {
            let row = op.compute_index().ok_or(ProfileError::ImplicitOp(*op))?;
            cost.validate(|| format!("{op}/{scheme}"))?;
            ops[row][index(scheme)?] = Some(*cost);
        }

        let mut table = vec![vec![UnitCost::ZERO; schemes.len()]; schemes.len()];
        let mut present = vec![vec![false; schemes.len()]; schemes.len()];
        for ((from, to), cost) in &conversions {
            let (i, j) = (index(from)?, index(to)?);
            if i == j {
                return Err(ProfileError::Parse(format!(
                    "self conversion {} is always free",
                    conversion_key(from, to)
                )));
            }
            cost.validate(|| conversion_key(from, to))?;
            table[i][j] = *cost;
            present[i][j] = true;
        }
        for i in 0..schemes.len() {
            for j in 0..schemes.len() {
                if i != j && !present[i][j] {
                    return Err(ProfileError::MissingConversion {
                        from: schemes[i].clone(),
                        to: schemes[j].clone(),
                    });
                }
            }
        }

        let universal = (0..schemes.len()).any(|s| ops.iter().all(|row| row[s].is_some()));
        if !universal {
            return Err(ProfileError::NoUniversalScheme);
        }

        let cents = |c: UnitCost| (c.p * scale, c.n * scale);
        let ops_cents = ops
            .iter()
            .map(|row| row.iter().map(|c| c.map(cents)).collect())
            .collect();
        let conv_cents = table
            .iter()
            .map(|row| row.iter().map(|&c| cents(c)).collect())
            .collect();
        Ok(CostProfile {
            name: name.into(),
            scale,
            schemes,
            ops,
            conversions: table,
            ops_cents,
            conv_cents,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn schemes(&self) -> &[Scheme] {
        &self.schemes
    }

    pub fn scheme_index(&self, scheme: &str) -> Option<usize> {
        self.schemes.iter().position(|s| s.as_str() == scheme)
    }

    /// Stored-unit cost of `op` under scheme index `s`; In/Out are free everywhere.
    pub fn op_unit(&self, op: OpKind, s: usize) -> Option<UnitCost> {
        match op.compute_index() {
            Some(row) => self.ops[row][s],
            None => Some(UnitCost::ZERO),
        }
    }

    pub fn conversion_unit(&self, from: usize, to: usize) -> UnitCost {
        self.conversions[from][to]
    }

    /// `(compute, network)` in cents.
    pub fn op_cents(&self, op: OpKind, s: usize) -> Option<(f64, f64)> {
        match op.compute_index() {
            Some(row) => self.ops_cents[row][s],
            None => Some((0.0, 0.0)),
        }
    }

    /// `(compute, network)` in cents of re-sharing from `from` to `to`.
    pub fn conversion_cents(&self, from: usize, to: usize) -> (f64, f64) {
        self.conv_cents[from][to]
    }

    pub fn supports(&self, op: OpKind, s: usize) -> bool {
        self.op_unit(op, s).is_some()
    }

    /// Scheme indices supporting `op`, in profile order.
    pub fn support(&self, op: OpKind) -> Vec<usize> {
        (0..self.schemes.len())
            .filter(|&s| self.supports(op, s))
            .collect()
    }

    /// Schemes that support every operation.
    pub fn universal_schemes(&self) -> Vec<usize> {
        (0..self.schemes.len())
            .filter(|&s| OpKind::COMPUTE.iter().all(|&op| self.supports(op, s)))
            .collect()
    }

    /// Copy with every stored entry multiplied by `k`.
    pub fn scaled(&self, k: f64) -> CostProfile {
        let mul = |c: UnitCost| UnitCost::new(c.p * k, c.n * k);
        let (ops, conversions) = self.entries();
        CostProfile::new(
            format!("{}x{k}", self.name),
            self.scale,
            self.schemes.clone(),
            ops.into_iter().map(|(key, c)| (key, mul(c))).collect(),
            conversions
                .into_iter()
                .map(|(key, c)| (key, mul(c)))
                .collect(),
        )
        .expect("scaling by a positive factor keeps a profile valid")
    }

    #[allow(clippy::type_complexity)]
    pub fn entries(
        &self,
    ) -> (
        BTreeMap<(OpKind, Scheme), UnitCost>,
        BTreeMap<(Scheme, Scheme), UnitCost>,
    ) {
        let mut ops = BTreeMap::new();
        for (row, op) in OpKind::COMPUTE.iter().enumerate() {
            for (s, cost) in self.ops[row].iter().enumerate() {
                if let Some(c) = cost {
                    ops.insert((*op, self.schemes[s].clone()), *c);
                }
            }
        }
        let mut conversions = BTreeMap::new();
        for (i, from) in self.schemes.iter().enumerate() {
            for (j, to) in self.schemes.iter().enumerate() {
                if i != j {
                    conversions.insert((from.clone(), to.clone()), self.conversions[i][j]);
                }
            }
        }
        (ops, conversions)
    }

    pub fn to_json(&self) -> String {
        let (ops, conversions) = self.entries();
        let mut op_map: BTreeMap<OpKind, BTreeMap<Scheme, UnitCost>> = BTreeMap::new();
        for ((op, scheme), c) in ops {
            op_map.entry(op).or_default().insert(scheme, c);
        }
        let file = ProfileFile {
            name: self.name.clone(),
            scale: self.scale,
            schemes: self.schemes.clone(),
            ops: op_map,
            conversions: conversions
                .into_iter()
                .map(|((a, b), c)| (conversion_key(&a, &b), c))
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("profile serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<CostProfile, ProfileError> {
        let file: ProfileFile =
            serde_json::from_str(text).map_err(|e| ProfileError::Parse(e.to_string()))?;
        let mut ops = BTreeMap::new();
        for (op, row) in file.ops {
            for (scheme, cost) in row {
                ops.insert((op, scheme), cost);
            }
        }
        let mut conversions = BTreeMap::new();
        for (key, cost) in file.conversions {
            let (a, b) = key
                .split_once("->")
                .ok_or_else(|| ProfileError::Parse(format!("bad conversion key \"{key}\"")))?;
            conversions.insert((Scheme::new(a), Scheme::new(b)), cost);
        }
        CostProfile::new(file.name, file.scale, file.schemes, ops, conversions)
    }
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<CostProfile, ProfileError> {
    CostProfile::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_profile(profile: &CostProfile, path: impl AsRef<Path>) -> Result<(), ProfileError> {
    std::fs::write(path, profile.to_json())?;
    Ok(())
}

/// Profiles measured on EC2 in two placements (same region, two regions) for
/// four VM models. Intra-region tables are in 1e-10 cents with free network;
/// inter-region tables are in 1e-6 cents.
pub const SHIPPED: [(&str, &str); 8] = [
    (
        "intra-m3.medium",
        include_str!("../../profiles/intra-m3.medium.json"),
    ),
    (
        "intra-m3.large",
        include_str!("../../profiles/intra-m3.large.json"),
    ),
    (
        "intra-c4.large",
        include_str!("../../profiles/intra-c4.large.json"),
    ),
    (
        "intra-c4.xlarge",
        include_str!("../../profiles/intra-c4.xlarge.json"),
    ),
    (
        "inter-m3.medium",
        include_str!("../../profiles/inter-m3.medium.json"),
    ),
    (
        "inter-m3.large",
        include_str!("../../profiles/inter-m3.large.json"),
    ),
    (
        "inter-c4.large",
        include_str!("../../profiles/inter-c4.large.json"),
    ),
    (
        "inter-c4.xlarge",
        include_str!("../../profiles/inter-c4.xlarge.json"),
    ),
];

/// Looks up a shipped profile by name, with or without a `.json` suffix.
pub fn shipped_profile(name: &str) -> Result<CostProfile, ProfileError> {
    let key = name.strip_suffix(".json").unwrap_or(name);
    SHIPPED
        .iter()
        .find(|(n, _)| *n == key)
        .ok_or_else(|| ProfileError::UnknownProfile(name.to_string()))
        .and_then(|(_, text)| CostProfile::from_json(text))
}

pub fn shipped_profiles() -> Vec<CostProfile> {
    SHIPPED
        .iter()
        .map(|(_, text)| CostProfile::from_json(text).expect("shipped profile is valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::type_complexity)]
    fn small() -> (
        BTreeMap<(OpKind, Scheme), UnitCost>,
        BTreeMap<(Scheme, Scheme), UnitCost>,
    ) {
        let a = Scheme::new("a");
        let b = Scheme::new("b");
        let mut ops = BTreeMap::new();
        for op in OpKind::COMPUTE {
            ops.insert((op, b.clone()), UnitCost::new(1.0, 2.0));
        }
        ops.insert((OpKind::Add, a.clone()), UnitCost::new(0.5, 0.0));
        let conv = BTreeMap::from([
            ((a.clone(), b.clone()), UnitCost::new(1.0, 1.0)),
            ((b, a), UnitCost::new(3.0, 0.0)),
        ]);
        (ops, conv)
    }

    fn schemes() -> Vec<Scheme> {
        vec![Scheme::new("a"), Scheme::new("b")]
    }

    #[test]
    fn support_sets() {
        let (ops, conv) = small();
        let p = CostProfile::new("t", 1.0, schemes(), ops, conv).unwrap();
        assert_eq!(p.support(OpKind::Add), vec![0, 1]);
        assert_eq!(p.support(OpKind::Sub), vec![1]);
        assert_eq!(p.support(OpKind::In), vec![0, 1]);
        assert_eq!(p.universal_schemes(), vec![1]);
        assert_eq!(p.conversion_cents(0, 0), (0.0, 0.0));
        assert_eq!(p.conversion_cents(1, 0), (3.0, 0.0));
    }

    #[test]
    fn validation_errors() {
        let (ops, mut conv) = small();
        conv.remove(&(Scheme::new("b"), Scheme::new("a")));
        assert!(matches!(
            CostProfile::new("t", 1.0, schemes(), ops, conv).unwrap_err(),
            ProfileError::MissingConversion { .. }
        ));

        let (mut ops, conv) = small();
        ops.insert((OpKind::Mul, Scheme::new("a")), UnitCost::new(-1.0, 0.0));
        assert!(matches!(
            CostProfile::new("t", 1.0, schemes(), ops, conv).unwrap_err(),
            ProfileError::NegativeCost(_)
        ));

        let (mut ops, conv) = small();
        ops.remove(&(OpKind::Ge, Scheme::new("b")));
        assert!(matches!(
            CostProfile::new("t", 1.0, schemes(), ops, conv).unwrap_err(),
            ProfileError::NoUniversalScheme
        ));

        let (mut ops, conv) = small();
        ops.insert((OpKind::In, Scheme::new("b")), UnitCost::ZERO);
        assert!(matches!(
            CostProfile::new("t", 1.0, schemes(), ops, conv).unwrap_err(),
            ProfileError::ImplicitOp(OpKind::In)
        ));

        let (ops, conv) = small();
        assert!(matches!(
            CostProfile::new("t", 0.0, schemes(), ops, conv).unwrap_err(),
            ProfileError::InvalidScale(_)
        ));
    }

    #[test]
    fn shipped_profiles_load() {
        assert_eq!(shipped_profiles().len(), 8);
        let intra = shipped_profile("intra-m3.medium.json").unwrap();
        assert_eq!(intra.scale(), 1e-10);
        let (ops, conv) = intra.entries();
        assert!(ops.values().chain(conv.values()).all(|c| c.n == 0.0));

        let inter = shipped_profile("inter-m3.medium").unwrap();
        let yao = inter.scheme_index("yao").unwrap();
        assert_eq!(inter.op_unit(OpKind::Mul, yao).unwrap().n, 6289.92);
        assert!(matches!(
            shipped_profile("nope").unwrap_err(),
            ProfileError::UnknownProfile(_)
        ));
    }

    #[test]
    fn arithmetic_supports_only_add_and_mul() {
        for p in shipped_profiles() {
            let a = p.scheme_index(Scheme::ARITHMETIC).unwrap();
            let supported: Vec<_> = OpKind::COMPUTE
                .into_iter()
                .filter(|&op| p.supports(op, a))
                .collect();
            assert_eq!(supported, vec![OpKind::Add, OpKind::Mul], "{}", p.name());
            let universal: Vec<_> = p
                .universal_schemes()
                .into_iter()
                .map(|s| p.schemes()[s].to_string())
                .collect();
            assert_eq!(universal, vec!["boolean", "yao"], "{}", p.name());
        }
    }

    #[test]
    fn missing_boolean_to_yao_is_rejected() {
        let text = shipped_profile("inter-c4.large").unwrap().to_json();
        let broken = text.replace("\"boolean->yao\"", "\"boolean->boolean\"");
        assert!(matches!(
            CostProfile::from_json(&broken).unwrap_err(),
            ProfileError::Parse(_)
        ));
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["conversions"]
            .as_object_mut()
            .unwrap()
            .remove("boolean->yao");
        match CostProfile::from_json(&v.to_string()).unwrap_err() {
            ProfileError::MissingConversion { from, to } => {
                assert_eq!((from.as_str(), to.as_str()), ("boolean", "yao"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
