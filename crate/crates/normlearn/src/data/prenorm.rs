//! Offline pre-normalization passes: divide each feature by its max
//! empirical absolute value (max-norm) or by the square root of its
//! second moment over the dataset (squared-norm). The scale-invariant
//! learners make this unnecessary; it exists to reproduce the
//! pre-normalized baselines.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::sparse::Example;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrenormMode {
    MaxNorm,
    SqNorm,
}

impl FromStr for PrenormMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maxnorm" | "max-norm" => Ok(PrenormMode::MaxNorm),
            "sqnorm" | "sq-norm" | "squared-norm" => Ok(PrenormMode::SqNorm),
            other => Err(format!("unknown pre-normalization mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrenormResult {
    pub examples: Vec<Example>,
    /// Per-feature divisor applied, for audit.
    pub divisors: BTreeMap<u32, f64>,
}

/// Two-pass normalization; features that never appear stay untouched
/// (they have no divisor entry).
pub fn prenormalize(examples: &[Example], mode: PrenormMode) -> PrenormResult {
    let t = examples.len() as f64;
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    for e in examples {
        for (id, x) in e.features.iter() {
            let entry = acc.entry(id).or_insert(0.0f64);
            match mode {
                PrenormMode::MaxNorm => *entry = entry.max(x.abs()),
                PrenormMode::SqNorm => *entry += x * x,
            }
        }
    }
    let divisors: BTreeMap<u32, f64> = acc
        .into_iter()
        .map(|(id, v)| {
            let divisor = match mode {
                PrenormMode::MaxNorm => v,
                PrenormMode::SqNorm => (v / t).sqrt(),
            };
            (id, divisor)
        })
        .collect();
    let examples = examples
        .iter()
        .map(|e| Example::new(e.features.map_values(|id, x| x / divisors[&id]), e.label))
        .collect();
    PrenormResult { examples, divisors }
}
