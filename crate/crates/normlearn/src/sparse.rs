//! Sparse vectors keyed by dense non-negative feature ids, and the
//! labeled examples built from them.
//!
//! Zeros are never stored: a feature that is absent contributes nothing
//! anywhere in the library, so an explicit zero and a missing entry would
//! be indistinguishable yet break invariants like "no stored feature value
//! is exactly zero".

use std::collections::BTreeMap;
use std::fmt;

/// A sparse real vector: `(id, value)` pairs sorted by id, unique ids,
/// no zero values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    entries: Vec<(u32, f64)>,
}

/// Error building a [`SparseVec`] from raw pairs.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SparseVecError {
    #[error("duplicate feature id {0}")]
    DuplicateId(u32),
    #[error("non-finite value for feature id {0}")]
    NonFinite(u32),
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from arbitrary pairs: sorts by id, drops exact zeros,
    /// rejects duplicates and non-finite values.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self, SparseVecError> {
        let mut entries: Vec<(u32, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|&(id, _)| id);
        for win in entries.windows(2) {
            if win[0].0 == win[1].0 {
                return Err(SparseVecError::DuplicateId(win[0].0));
            }
        }
        for &(id, v) in &entries {
            if !v.is_finite() {
                return Err(SparseVecError::NonFinite(id));
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        Ok(Self { entries })
    }

    /// Builds from pairs already known to be sorted, unique, non-zero and
    /// finite. Checked in debug builds.
    pub fn from_sorted_unchecked(entries: Vec<(u32, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(_, v)| v != 0.0 && v.is_finite()));
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(id, _)| id)
    }

    /// Value at `id`, 0 if absent.
    pub fn get(&self, id: u32) -> f64 {
        match self.entries.binary_search_by_key(&id, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        // merge join over the two sorted supports
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut acc = 0.0;
        while let (Some(&&(ia, va)), Some(&&(ib, vb))) = (a.peek(), b.peek()) {
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    acc += va * vb;
                    a.next();
                    b.next();
                }
            }
        }
        acc
    }

    /// Applies `f` to every value, dropping entries that become zero.
    pub fn map_values(&self, mut f: impl FnMut(u32, f64) -> f64) -> SparseVec {
        let entries = self
            .entries
            .iter()
            .map(|&(id, v)| (id, f(id, v)))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        Self { entries }
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    pub fn to_map(&self) -> BTreeMap<u32, f64> {
        self.entries.iter().copied().collect()
    }

    pub fn from_map(map: &BTreeMap<u32, f64>) -> Self {
        Self {
            entries: map.iter().map(|(&id, &v)| (id, v)).filter(|&(_, v)| v != 0.0).collect(),
        }
    }
}

impl fmt::Display for SparseVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &(id, v) in &self.entries {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}:{}", id, v)?;
            first = false;
        }
        Ok(())
    }
}

/// Union of the supports of several sparse vectors, sorted and deduped.
pub fn support_union<'a>(vecs: impl IntoIterator<Item = &'a SparseVec>) -> Vec<u32> {
    let mut ids: Vec<u32> = vecs.into_iter().flat_map(|v| v.ids()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// One labeled example: sparse features and a real label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVec,
    pub label: f64,
}

impl Example {
    pub fn new(features: SparseVec, label: f64) -> Self {
        Self { features, label }
    }
}
