//! Unit-cost profiles from externally measured per-operation timings and traffic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::profile::{CostProfile, ProfileError, Scheme, UnitCost};
use crate::circuit::OpKind;

#[derive(Debug, Error)]
pub enum DeriveError {
    #[error("duplicate measurement for {0}")]
    DuplicateMeasurement(String),
    #[error("negative or non-finite input: {0}")]
    NegativeInput(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Cloud price sheet. VM rates are cents per hour, `net_rate` is cents per GB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceSpec {
    pub vm_rate_a: f64,
    pub vm_rate_b: f64,
    pub net_rate: f64,
    #[serde(default = "default_gb_bytes")]
    pub gb_bytes: f64,
}

fn default_gb_bytes() -> f64 {
    1e9
}

impl PriceSpec {
    pub fn new(vm_rate_a: f64, vm_rate_b: f64, net_rate: f64) -> Self {
        PriceSpec {
            vm_rate_a,
            vm_rate_b,
            net_rate,
            gb_bytes: default_gb_bytes(),
        }
    }

    fn validate(&self) -> Result<(), DeriveError> {
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if !(ok(self.vm_rate_a) && ok(self.vm_rate_b) && ok(self.net_rate)) {
            return Err(DeriveError::NegativeInput("price rates".into()));
        }
        if !(self.gb_bytes > 0.0 && self.gb_bytes.is_finite()) {
            return Err(DeriveError::NegativeInput("gb_bytes".into()));
        }
        Ok(())
    }

    /// Cents for `seconds` of both VMs running.
    pub fn compute_cents(&self, seconds: f64) -> f64 {
        seconds * (self.vm_rate_a + self.vm_rate_b) / 3600.0
    }

    pub fn network_cents(&self, bytes: f64) -> f64 {
        bytes * self.net_rate / self.gb_bytes
    }
}

/// What a measurement is for: an operation under one scheme, or a conversion
/// written `"from->to"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasuredItem {
    Op { op: OpKind, scheme: Scheme },
    Conversion { conversion: String },
}

impl MeasuredItem {
    fn label(&self) -> String {
        match self {
            MeasuredItem::Op { op, scheme } => format!("{op}/{scheme}"),
            MeasuredItem::Conversion { conversion } => conversion.clone(),
        }
    }
}

/// Averaged cost of one operation or conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMeasurement {
    #[serde(flatten)]
    pub item: MeasuredItem,
    pub seconds_per_op: f64,
    pub bytes_per_op: f64,
}

/// Builds a profile whose stored values are `cents / scale`.
///
/// Schemes are ordered arithmetic, boolean, yao (whichever appear), followed
/// by any other scheme in order of first appearance.
pub fn derive_profile(
    measurements: &[RawMeasurement],
    prices: &PriceSpec,
    name: &str,
    scale: f64,
) -> Result<CostProfile, DeriveError> {
    prices.validate()?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ProfileError::InvalidScale(scale).into());
    }

    let mut seen = BTreeMap::new();
    let mut appearance: Vec<Scheme> = Vec::new();
    let mut note = |s: &Scheme| {
        if !appearance.contains(s) {
            appearance.push(s.clone());
        }
    };
    let mut ops = BTreeMap::new();
    let mut conversions = BTreeMap::new();

    for m in measurements {
        let label = m.item.label();
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if !(ok(m.seconds_per_op) && ok(m.bytes_per_op)) {
            return Err(DeriveError::NegativeInput(label));
        }
        if seen.insert(m.item.clone(), ()).is_some() {
            return Err(DeriveError::DuplicateMeasurement(label));
        }
        let cost = UnitCost::new(
            prices.compute_cents(m.seconds_per_op) / scale,
            prices.network_cents(m.bytes_per_op) / scale,
        );
        match &m.item {
            MeasuredItem::Op { op, scheme } => {
                note(scheme);
                ops.insert((*op, scheme.clone()), cost);
            }
            MeasuredItem::Conversion { conversion } => {
                let (a, b) = conversion.split_once("->").ok_or_else(|| {
                    ProfileError::Parse(format!("bad conversion key \"{conversion}\""))
                })?;
                let (a, b) = (Scheme::new(a), Scheme::new(b));
                note(&a);
                note(&b);
                conversions.insert((a, b), cost);
            }
        }
    }

    let canonical = [Scheme::ARITHMETIC, Scheme::BOOLEAN, Scheme::YAO];
    let mut schemes: Vec<Scheme> = canonical
        .iter()
        .map(|&s| Scheme::new(s))
        .filter(|s| appearance.contains(s))
        .collect();
    schemes.extend(
        appearance
            .into_iter()
            .filter(|s| !canonical.contains(&s.as_str())),
    );
    Ok(CostProfile::new(name, scale, schemes, ops, conversions)?)
}
