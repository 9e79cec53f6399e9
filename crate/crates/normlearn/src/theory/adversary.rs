//! The scaling adversary's ball and its empirical estimate: the diagonal
//! S with minimum volume such that every observed input satisfies
//! ||S^{1/2} x||_p <= 1, which for p = infinity is S_ii = 1 / max_t x_ti^2.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::projection::QNorm;
use crate::sparse::Example;
use crate::theory::TheoryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PNorm {
    Inf,
    Two,
}

impl PNorm {
    /// Dual exponent: 1/p + 1/q = 1.
    pub fn dual(self) -> QNorm {
        match self {
            PNorm::Inf => QNorm::One,
            PNorm::Two => QNorm::Two,
        }
    }
}

impl FromStr for PNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "infinity" | "max" => Ok(PNorm::Inf),
            "2" => Ok(PNorm::Two),
            other => Err(format!("invalid input norm `{other}` (expected inf or 2)")),
        }
    }
}

/// The input ball `||S^{1/2} x||_p <= 1` together with the output bound C
/// of the comparator class `{w : ||S^{-1/2} w||_q <= C}`.
#[derive(Debug, Clone)]
pub struct AdversaryBall {
    pub s_diag: BTreeMap<u32, f64>,
    pub p: PNorm,
    pub c: f64,
}

impl AdversaryBall {
    /// Largest `||S^{1/2} x||_p` over the examples; inputs are admissible
    /// when this is <= 1 + 1e-9.
    pub fn max_input_norm(&self, examples: &[Example]) -> f64 {
        let mut worst = 0.0f64;
        for e in examples {
            let norm = match self.p {
                PNorm::Inf => e
                    .features
                    .iter()
                    .map(|(id, x)| (self.s_diag.get(&id).copied().unwrap_or(0.0)).sqrt() * x.abs())
                    .fold(0.0, f64::max),
                PNorm::Two => e
                    .features
                    .iter()
                    .map(|(id, x)| self.s_diag.get(&id).copied().unwrap_or(0.0) * x * x)
                    .sum::<f64>()
                    .sqrt(),
            };
            worst = worst.max(norm);
        }
        worst
    }

    pub fn inputs_admissible(&self, examples: &[Example]) -> bool {
        self.max_input_norm(examples) <= 1.0 + 1e-9
    }

    /// Projection configuration of the dual (comparator) ball.
    pub fn comparator_projection(&self) -> crate::projection::ProjectionConfig {
        crate::projection::ProjectionConfig {
            c: self.c,
            q: self.p.dual(),
            s_diag: self.s_diag.clone(),
        }
    }
}

/// Empirical S from observed inputs: S_ii = 1 / max_t x_ti^2. Exact for
/// p = infinity; for p = 2 the same diagonal is used as a stand-in and
/// callers should verify admissibility or supply their own S.
pub fn empirical_s(examples: &[Example], _p: PNorm) -> Result<BTreeMap<u32, f64>, TheoryError> {
    if examples.is_empty() {
        return Err(TheoryError::EmptyDataset);
    }
    let mut max_sq: BTreeMap<u32, f64> = BTreeMap::new();
    for e in examples {
        for (id, x) in e.features.iter() {
            let m = max_sq.entry(id).or_insert(0.0f64);
            *m = m.max(x * x);
        }
    }
    Ok(max_sq.into_iter().map(|(id, m)| (id, 1.0 / m)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseVec;

    fn ex(pairs: &[(u32, f64)]) -> Example {
        Example::new(SparseVec::from_pairs(pairs.iter().copied()).unwrap(), 0.0)
    }

    #[test]
    fn single_example_s() {
        let s = empirical_s(&[ex(&[(1, 2.0)])], PNorm::Inf).unwrap();
        assert_eq!(s[&1], 0.25);
    }

    #[test]
    fn unit_scale_feature() {
        let s = empirical_s(&[ex(&[(0, 0.3)]), ex(&[(0, -1.0)]), ex(&[(0, 0.7)])], PNorm::Inf)
            .unwrap();
        assert_eq!(s[&0], 1.0);
    }

    #[test]
    fn rescaling_divides_s_by_c_squared() {
        let base = vec![ex(&[(0, 0.5)]), ex(&[(0, 2.0)])];
        let scaled: Vec<Example> = base
            .iter()
            .map(|e| Example::new(e.features.map_values(|_, v| 3.0 * v), e.label))
            .collect();
        let s1 = empirical_s(&base, PNorm::Inf).unwrap();
        let s2 = empirical_s(&scaled, PNorm::Inf).unwrap();
        assert!((s2[&0] - s1[&0] / 9.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_s_makes_inputs_admissible() {
        let examples = vec![ex(&[(0, 0.5), (1, -4.0)]), ex(&[(0, 2.0)])];
        let s = empirical_s(&examples, PNorm::Inf).unwrap();
        let ball = AdversaryBall { s_diag: s, p: PNorm::Inf, c: 1.0 };
        assert!(ball.inputs_admissible(&examples));
        assert!((ball.max_input_norm(&examples) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(empirical_s(&[], PNorm::Inf), Err(TheoryError::EmptyDataset)));
    }
}
