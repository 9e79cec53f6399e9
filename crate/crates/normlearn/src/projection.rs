//! Projection onto a scaled norm ball under a diagonal quadratic metric.
//!
//! `project` returns the minimizer of `(w - w')^T diag(A) (w - w')` subject
//! to `||S^{-1/2} w||_q <= C`, for q in {1, 2} and diagonal positive `A`,
//! `S`. Coordinates absent from `w'` stay absent: the problem is separable
//! and 0 is both optimal and feasible for them.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::sparse::SparseVec;

/// Dual norm exponent of the constraint ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QNorm {
    One,
    Two,
}

impl QNorm {
    pub fn as_u32(self) -> u32 {
        match self {
            QNorm::One => 1,
            QNorm::Two => 2,
        }
    }
}

impl FromStr for QNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(QNorm::One),
            "2" => Ok(QNorm::Two),
            other => Err(format!("invalid norm exponent `{other}` (expected 1 or 2)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionConfig {
    /// Output bound C > 0.
    pub c: f64,
    pub q: QNorm,
    /// Diagonal of S; must be positive on the support being projected.
    pub s_diag: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProjectionError {
    #[error("invalid metric: {what} entry for feature {id} is {value} (must be positive and finite)")]
    InvalidMetric { id: u32, what: &'static str, value: f64 },
    #[error("projection bound C must be positive, got {0}")]
    InvalidBound(f64),
}

/// `||S^{-1/2} w||_q` over the support of `w`.
pub fn scaled_norm(w: &SparseVec, s_diag: &BTreeMap<u32, f64>, q: QNorm) -> f64 {
    match q {
        QNorm::One => w
            .iter()
            .map(|(id, v)| v.abs() / s_diag.get(&id).copied().unwrap_or(f64::INFINITY).sqrt())
            .sum(),
        QNorm::Two => w
            .iter()
            .map(|(id, v)| v * v / s_diag.get(&id).copied().unwrap_or(f64::INFINITY))
            .sum::<f64>()
            .sqrt(),
    }
}

fn check_entry(id: u32, what: &'static str, value: Option<f64>) -> Result<f64, ProjectionError> {
    let v = value.unwrap_or(0.0);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ProjectionError::InvalidMetric { id, what, value: v })
    }
}

/// Projection of `w_prime` under metric `diag(a_diag)` onto
/// `{w : ||S^{-1/2} w||_q <= C}`.
pub fn project(
    w_prime: &SparseVec,
    a_diag: &BTreeMap<u32, f64>,
    cfg: &ProjectionConfig,
) -> Result<SparseVec, ProjectionError> {
    if !(cfg.c.is_finite() && cfg.c > 0.0) {
        return Err(ProjectionError::InvalidBound(cfg.c));
    }
    // collect (id, w', a, s) over the support, validating the metric
    let mut coords = Vec::with_capacity(w_prime.len());
    for (id, w) in w_prime.iter() {
        let a = check_entry(id, "A", a_diag.get(&id).copied())?;
        let s = check_entry(id, "S", cfg.s_diag.get(&id).copied())?;
        coords.push((id, w, a, s));
    }

    if scaled_norm(w_prime, &cfg.s_diag, cfg.q) <= cfg.c {
        return Ok(w_prime.clone());
    }

    let entries = match cfg.q {
        QNorm::Two => project_q2(&coords, cfg.c),
        QNorm::One => project_q1(&coords, cfg.c),
    };
    Ok(SparseVec::from_sorted_unchecked(entries))
}

/// q = 2: w_i(lambda) = w'_i * k_i / (k_i + lambda) with k_i = A_i S_i;
/// the Lagrange multiplier lambda >= 0 solves ||S^{-1/2} w(lambda)||_2 = C.
fn project_q2(coords: &[(u32, f64, f64, f64)], c: f64) -> Vec<(u32, f64)> {
    let norm_at = |lambda: f64| -> f64 {
        coords
            .iter()
            .map(|&(_, w, a, s)| {
                let k = a * s;
                let wi = w * k / (k + lambda);
                wi * wi / s
            })
            .sum::<f64>()
            .sqrt()
    };

    // bracket: lambda_hi with norm(lambda_hi) <= C
    let k_max = coords.iter().map(|&(_, _, a, s)| a * s).fold(0.0, f64::max);
    let norm0 = norm_at(0.0);
    let mut hi = k_max * (norm0 / c - 1.0) + 1.0;
    while norm_at(hi) > c {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let n = norm_at(mid);
        if n > c {
            lo = mid;
        } else {
            hi = mid;
        }
        if (n - c).abs() <= 1e-12 * c {
            break;
        }
    }
    // hi side is feasible
    let lambda = hi;
    coords
        .iter()
        .map(|&(id, w, a, s)| {
            let k = a * s;
            (id, w * k / (k + lambda))
        })
        .filter(|&(_, v)| v != 0.0)
        .collect()
}

/// q = 1: in u = S^{-1/2} w coordinates this is a weighted soft-threshold
/// u_i = sign(u'_i) max(0, |u'_i| - mu / (2 A_i S_i)), with mu found by an
/// exact scan over the sorted death breakpoints mu_i = 2 |u'_i| A_i S_i.
fn project_q1(coords: &[(u32, f64, f64, f64)], c: f64) -> Vec<(u32, f64)> {
    struct Coord {
        id: u32,
        u_abs: f64,
        sign: f64,
        inv2b: f64, // 1 / (2 A_i S_i)
        death: f64, // mu at which this coordinate reaches 0
        s_sqrt: f64,
    }
    let mut cs: Vec<Coord> = coords
        .iter()
        .map(|&(id, w, a, s)| {
            let s_sqrt = s.sqrt();
            let u = w / s_sqrt;
            let b = a * s;
            Coord {
                id,
                u_abs: u.abs(),
                sign: if u >= 0.0 { 1.0 } else { -1.0 },
                inv2b: 1.0 / (2.0 * b),
                death: 2.0 * u.abs() * b,
                s_sqrt,
            }
        })
        .collect();
    // descending by death breakpoint, ties broken by feature id
    cs.sort_by(|x, y| y.death.partial_cmp(&x.death).unwrap().then(x.id.cmp(&y.id)));

    let mut sum_abs = 0.0;
    let mut sum_inv = 0.0;
    let mut mu = 0.0;
    for j in 0..cs.len() {
        sum_abs += cs[j].u_abs;
        sum_inv += cs[j].inv2b;
        let next_death = if j + 1 < cs.len() { cs[j + 1].death } else { 0.0 };
        let candidate = (sum_abs - c) / sum_inv;
        if candidate >= next_death {
            mu = candidate;
            break;
        }
    }

    let mut entries: Vec<(u32, f64)> = cs
        .iter()
        .map(|co| {
            let mag = (co.u_abs - mu * co.inv2b).max(0.0);
            (co.id, co.sign * mag * co.s_sqrt)
        })
        .filter(|&(_, v)| v != 0.0)
        .collect();
    entries.sort_by_key(|&(id, _)| id);
    entries
}

/// `(x - y)^T diag(A) (x - y)` with missing entries treated as 0.
pub fn metric_dist_sq(x: &SparseVec, y: &SparseVec, a_diag: &BTreeMap<u32, f64>) -> f64 {
    let ids = crate::sparse::support_union([x, y]);
    ids.iter()
        .map(|&id| {
            let d = x.get(id) - y.get(id);
            a_diag.get(&id).copied().unwrap_or(0.0) * d * d
        })
        .sum()
}

/// Iterative reference solver for the same problem, used to cross-check
/// the closed forms: projected gradient on the quadratic, with Euclidean
/// projection onto the ball each step. Converges linearly since the
/// objective is strongly convex on the support.
pub mod oracle {
    use super::*;

    pub fn pgd_project(
        w_prime: &SparseVec,
        a_diag: &BTreeMap<u32, f64>,
        cfg: &ProjectionConfig,
        iterations: usize,
    ) -> Result<SparseVec, ProjectionError> {
        let ids: Vec<u32> = w_prime.ids().collect();
        let unit: BTreeMap<u32, f64> = ids.iter().map(|&id| (id, 1.0)).collect();
        let max_a = ids
            .iter()
            .map(|id| a_diag.get(id).copied().unwrap_or(0.0))
            .fold(0.0f64, f64::max);
        if max_a <= 0.0 {
            return Err(ProjectionError::InvalidBound(max_a));
        }
        let step = 1.0 / (2.0 * max_a);
        let mut w = project(w_prime, &unit, cfg)?; // feasible start
        for _ in 0..iterations {
            let moved = SparseVec::from_pairs(ids.iter().map(|&id| {
                let grad = 2.0 * a_diag[&id] * (w.get(id) - w_prime.get(id));
                (id, w.get(id) - step * grad)
            }))
            .expect("unique ids");
            let next = project(&moved, &unit, cfg)?;
            let shift = ids
                .iter()
                .map(|&id| (next.get(id) - w.get(id)).abs())
                .fold(0.0f64, f64::max);
            w = next;
            if shift < 1e-15 {
                break;
            }
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_diag(ids: &[u32], v: f64) -> BTreeMap<u32, f64> {
        ids.iter().map(|&id| (id, v)).collect()
    }

    fn cfg(c: f64, q: QNorm, s: BTreeMap<u32, f64>) -> ProjectionConfig {
        ProjectionConfig { c, q, s_diag: s }
    }

    #[test]
    fn feasible_point_unchanged() {
        let w = SparseVec::from_pairs([(0, 0.3), (1, -0.4)]).unwrap();
        let a = uniform_diag(&[0, 1], 1.0);
        for q in [QNorm::One, QNorm::Two] {
            let out = project(&w, &a, &cfg(1.0, q, uniform_diag(&[0, 1], 1.0))).unwrap();
            assert_eq!(out, w);
        }
    }

    #[test]
    fn l1_unit_case() {
        // A = I, S = I, C = 1, w' = (2, 0) -> (1, 0)
        let w = SparseVec::from_pairs([(0, 2.0)]).unwrap();
        let a = uniform_diag(&[0], 1.0);
        let out = project(&w, &a, &cfg(1.0, QNorm::One, uniform_diag(&[0], 1.0))).unwrap();
        assert!((out.get(0) - 1.0).abs() < 1e-12);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn l1_weighted_metric_moves_cheap_coordinate() {
        // A = diag(1, 100), S = I, C = 1, w' = (1, 1).
        // KKT: w = (1/101, 100/101); coordinate 0 absorbs almost all the move.
        let w = SparseVec::from_pairs([(0, 1.0), (1, 1.0)]).unwrap();
        let a: BTreeMap<u32, f64> = [(0, 1.0), (1, 100.0)].into_iter().collect();
        let out = project(&w, &a, &cfg(1.0, QNorm::One, uniform_diag(&[0, 1], 1.0))).unwrap();
        assert!((out.get(0) - 1.0 / 101.0).abs() < 1e-12, "got {}", out.get(0));
        assert!((out.get(1) - 100.0 / 101.0).abs() < 1e-12, "got {}", out.get(1));
        let moved0 = (1.0 - out.get(0)).abs();
        let moved1 = (1.0 - out.get(1)).abs();
        assert!(moved0 > 10.0 * moved1);
    }

    #[test]
    fn q2_constraint_active_on_boundary() {
        let w = SparseVec::from_pairs([(0, 3.0), (1, -4.0)]).unwrap();
        let a: BTreeMap<u32, f64> = [(0, 2.0), (1, 0.5)].into_iter().collect();
        let s: BTreeMap<u32, f64> = [(0, 4.0), (1, 0.25)].into_iter().collect();
        let out = project(&w, &a, &cfg(1.5, QNorm::Two, s.clone())).unwrap();
        let norm = scaled_norm(&out, &s, QNorm::Two);
        assert!((norm - 1.5).abs() <= 1e-9, "norm {}", norm);
    }

    #[test]
    fn rejects_nonpositive_metric() {
        let w = SparseVec::from_pairs([(0, 1.0)]).unwrap();
        let a = uniform_diag(&[0], 0.0);
        let err = project(&w, &a, &cfg(1.0, QNorm::One, uniform_diag(&[0], 1.0))).unwrap_err();
        assert!(matches!(err, ProjectionError::InvalidMetric { what: "A", .. }));
        let a = uniform_diag(&[0], 1.0);
        let err = project(&w, &a, &cfg(1.0, QNorm::Two, uniform_diag(&[0], -2.0))).unwrap_err();
        assert!(matches!(err, ProjectionError::InvalidMetric { what: "S", .. }));
    }

    #[test]
    fn absent_features_stay_absent() {
        let w = SparseVec::from_pairs([(3, 5.0)]).unwrap();
        let a = uniform_diag(&[3], 1.0);
        let mut s = uniform_diag(&[3], 1.0);
        s.insert(7, 1.0); // S may mention more features than w'
        let out = project(&w, &a, &cfg(1.0, QNorm::One, s)).unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), vec![3]);
    }

    fn random_instance(rng: &mut ChaCha8Rng, d: usize) -> (SparseVec, BTreeMap<u32, f64>, ProjectionConfig) {
        let ids: Vec<u32> = (0..d as u32).collect();
        let w = SparseVec::from_pairs(ids.iter().map(|&id| (id, rng.random_range(-3.0..3.0))))
            .unwrap();
        let a: BTreeMap<u32, f64> =
            ids.iter().map(|&id| (id, rng.random_range(0.1..10.0))).collect();
        let s: BTreeMap<u32, f64> =
            ids.iter().map(|&id| (id, rng.random_range(0.1..10.0))).collect();
        let q = if rng.random_bool(0.5) { QNorm::One } else { QNorm::Two };
        let c = rng.random_range(0.1..5.0);
        (w, a, ProjectionConfig { c, q, s_diag: s })
    }

    #[test]
    fn feasibility_idempotence_nonexpansiveness() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let d = rng.random_range(1..=4usize);
            let (w, a, cfg) = random_instance(&mut rng, d);
            let p = project(&w, &a, &cfg).unwrap();

            let norm = scaled_norm(&p, &cfg.s_diag, cfg.q);
            assert!(norm <= cfg.c * (1.0 + 1e-10), "infeasible: {} > {}", norm, cfg.c);

            let pp = project(&p, &a, &cfg).unwrap();
            let ids = crate::sparse::support_union([&p, &pp]);
            for id in ids {
                assert!((p.get(id) - pp.get(id)).abs() <= 1e-10, "not idempotent at {}", id);
            }

            // non-expansiveness against a random feasible z
            let z_raw = SparseVec::from_pairs(
                (0..d as u32).map(|id| (id, rng.random_range(-1.0..1.0))),
            )
            .unwrap();
            let unit_a: BTreeMap<u32, f64> = (0..d as u32).map(|id| (id, 1.0)).collect();
            let z = project(&z_raw, &unit_a, &cfg).unwrap();
            let before = metric_dist_sq(&w, &z, &a);
            let after = metric_dist_sq(&p, &z, &a);
            assert!(after <= before + 1e-10, "expanded: {} > {}", after, before);
        }
    }
}
