//! Dataset ingestion (svmlight and CSV), synthetic generators for the
//! scaling experiments, permutation shuffling, pre-normalization and
//! dataset statistics.

pub mod csv;
pub mod prenorm;
pub mod svmlight;
pub mod synth;

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sparse::Example;

pub use csv::CsvReader;
pub use prenorm::{prenormalize, PrenormMode, PrenormResult};
pub use svmlight::{parse_svmlight_line, serialize_example, SvmlightReader};
pub use synth::{SyntheticKind, SyntheticSpec};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {what}")]
    Parse { line: usize, what: String },
    #[error("row {row}: {what}")]
    Csv { row: usize, what: String },
    #[error("line {line}: label {label} not in {{0, 1}} for zero-one label mapping")]
    UnmappableLabel { line: usize, label: f64 },
}

/// How raw labels are mapped before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMapping {
    #[default]
    Identity,
    /// {0, 1} -> {-1, +1}, rejecting anything else.
    ZeroOneToPm1,
}

impl LabelMapping {
    pub fn apply(self, label: f64, line: usize) -> Result<f64, DataError> {
        match self {
            LabelMapping::Identity => Ok(label),
            LabelMapping::ZeroOneToPm1 => {
                if label == 0.0 {
                    Ok(-1.0)
                } else if label == 1.0 {
                    Ok(1.0)
                } else {
                    Err(DataError::UnmappableLabel { line, label })
                }
            }
        }
    }
}

impl FromStr for LabelMapping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(LabelMapping::Identity),
            "zero-one" | "zero_one" => Ok(LabelMapping::ZeroOneToPm1),
            other => Err(format!("invalid label mapping `{other}`")),
        }
    }
}

/// Uniform random permutation (Fisher-Yates), deterministic per seed.
pub fn permute(examples: &[Example], seed: u64) -> Vec<Example> {
    let mut out = examples.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.shuffle(&mut rng);
    out
}

#[derive(Debug, Clone)]
pub struct DatasetStats {
    pub examples: usize,
    pub features: usize,
    pub nonzeros: usize,
    pub label_min: f64,
    pub label_max: f64,
    pub label_mean: f64,
    /// Per-feature scale = max empirical |x|.
    pub per_feature_maxabs: BTreeMap<u32, f64>,
    /// The dataset's scale range: min and max feature scale.
    pub scale_min: f64,
    pub scale_max: f64,
}

pub fn dataset_stats(examples: &[Example]) -> Option<DatasetStats> {
    if examples.is_empty() {
        return None;
    }
    let mut maxabs: BTreeMap<u32, f64> = BTreeMap::new();
    let mut nonzeros = 0usize;
    let mut label_min = f64::INFINITY;
    let mut label_max = f64::NEG_INFINITY;
    let mut label_sum = 0.0;
    for e in examples {
        nonzeros += e.features.len();
        label_min = label_min.min(e.label);
        label_max = label_max.max(e.label);
        label_sum += e.label;
        for (id, x) in e.features.iter() {
            let m = maxabs.entry(id).or_insert(0.0f64);
            *m = m.max(x.abs());
        }
    }
    let scale_min = maxabs.values().copied().fold(f64::INFINITY, f64::min);
    let scale_max = maxabs.values().copied().fold(0.0f64, f64::max);
    Some(DatasetStats {
        examples: examples.len(),
        features: maxabs.len(),
        nonzeros,
        label_min,
        label_max,
        label_mean: label_sum / examples.len() as f64,
        per_feature_maxabs: maxabs,
        scale_min,
        scale_max,
    })
}
