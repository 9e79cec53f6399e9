//! Per-instance verifiers for every bound: each one recomputes both
//! sides of its inequality from a recorded trace (or raw data) and
//! reports lhs, rhs and whether the bound holds at the stated tolerance.

use std::collections::BTreeMap;

use crate::loss::Loss;
use crate::projection::QNorm;
use crate::sparse::{support_union, Example, SparseVec};
use crate::theory::adversary::{empirical_s, AdversaryBall, PNorm};
use crate::theory::comparator::{
    comparator_loss_with_iterations, measured_regret, ComparatorResult,
};
use crate::theory::conditioner::{run_conditioned, CondRunConfig, CondRunResult, ConditionerKind};
use crate::theory::trace::RunTrace;
use crate::theory::TheoryError;

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub tolerance: f64,
}

impl InequalityReport {
    /// lhs <= rhs within a relative tolerance (plus a tiny absolute
    /// cushion so exact 0 <= 0 cases survive rounding).
    pub fn relative(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let holds = lhs <= rhs + tolerance * rhs.abs() + 1e-12;
        Self { lhs, rhs, holds, tolerance }
    }
}

/// Quadratic form sum_i a[i] (x[i] - y[i])^2 over the union support.
fn weighted_gap_sq(x: &SparseVec, y: &SparseVec, a: &SparseVec) -> f64 {
    let ids = support_union([x, y]);
    ids.iter()
        .map(|&id| {
            let d = x.get(id) - y.get(id);
            a.get(id) * d * d
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct Lemma1Report {
    /// 2 sum_t g_t^T (w_t - w*) <= rhs; literally true for any trace of
    /// the form w_{t+1} = w_t - A_t^{-1} g_t (projection only helps).
    pub linearized: InequalityReport,
    /// 2 (sum_t loss_t - sum_t loss(w*^T x_t)) <= rhs; follows from the
    /// linearized form by convexity.
    pub loss_regret: InequalityReport,
    pub initial_term: f64,
    pub drift_term: f64,
    pub gradient_term: f64,
}

/// Decomposition bound: both regret forms against
/// (w_1-w*) A_1 (w_1-w*) + sum drift + sum g^T A^{-1} g.
pub fn check_lemma1(
    trace: &RunTrace,
    w_star: &SparseVec,
    loss: Loss,
) -> Result<Lemma1Report, TheoryError> {
    trace.validate()?;
    let mut linearized = 0.0;
    let mut gradient_term = 0.0;
    let mut learner_loss = 0.0;
    let mut star_loss = 0.0;
    for (idx, r) in trace.rounds.iter().enumerate() {
        for (id, g) in r.g.iter() {
            let a = r.a_diag.get(id);
            if a <= 0.0 {
                return Err(TheoryError::Trace(crate::theory::trace::TraceError::Inconsistent {
                    round: idx + 1,
                    what: format!("gradient at feature {id} has no positive conditioner entry"),
                }));
            }
            gradient_term += g * g / a;
            linearized += g * (r.w.get(id) - w_star.get(id));
        }
        learner_loss += r.loss;
        star_loss += loss.value(w_star.dot(&r.x), r.y);
    }

    let first = &trace.rounds[0];
    let initial_term = weighted_gap_sq(&first.w, w_star, &first.a_diag);
    let mut drift_term = 0.0;
    for t in 0..trace.rounds.len() - 1 {
        let next_w = &trace.rounds[t + 1].w;
        let a_now = &trace.rounds[t].a_diag;
        let a_next = &trace.rounds[t + 1].a_diag;
        let ids = support_union([next_w, w_star, a_now, a_next]);
        for id in ids {
            let d = next_w.get(id) - w_star.get(id);
            drift_term += (a_next.get(id) - a_now.get(id)) * d * d;
        }
    }

    let rhs = initial_term + drift_term + gradient_term;
    Ok(Lemma1Report {
        linearized: InequalityReport::relative(2.0 * linearized, rhs, 1e-9),
        loss_regret: InequalityReport::relative(2.0 * (learner_loss - star_loss), rhs, 1e-9),
        initial_term,
        drift_term,
        gradient_term,
    })
}

/// Adaptive gradient lemma: sum_i x_i^2 / sqrt(prefix sum) <= 2 sqrt(total).
/// Zero-prefix terms are skipped (their numerator is zero too).
pub fn check_lemma_adaptive_grad(x: &[f64]) -> InequalityReport {
    let mut prefix = 0.0;
    let mut lhs = 0.0;
    for &v in x {
        prefix += v * v;
        if prefix > 0.0 {
            lhs += v * v / prefix.sqrt();
        }
    }
    InequalityReport::relative(lhs, 2.0 * prefix.sqrt(), 1e-12)
}

#[derive(Debug, Clone)]
pub struct P2Report {
    /// sum_i sqrt(S_ii sum_t g_ti^2) <= sqrt(d) sqrt(sum_i S_ii sum_t g_ti^2)
    pub step_concavity: InequalityReport,
    /// sqrt(sum_i S_ii sum g^2) == sqrt(sum_t g'_t^2 sum_i S_ii x_ti^2), algebra
    pub algebra_gap: f64,
    /// sqrt(d) sqrt(sum_t g'^2 sum_i S x^2) <= sqrt(d) sqrt(sum_t g'^2)
    pub step_ball: InequalityReport,
    /// C sqrt(d) sqrt(sum g'^2)
    pub bound: f64,
    pub holds: bool,
}

/// The p = 2 chain. Requires sum_i S_ii x_ti^2 <= 1 on every round;
/// violations are reported as errors, not bound failures.
pub fn check_p2_bound(trace: &RunTrace, ball: &AdversaryBall) -> Result<P2Report, TheoryError> {
    trace.validate()?;
    for (idx, r) in trace.rounds.iter().enumerate() {
        let mut v = 0.0;
        for (id, x) in r.x.iter() {
            let s = match ball.s_diag.get(&id) {
                Some(&s) if s > 0.0 => s,
                _ => return Err(TheoryError::MissingScaleEntry(id)),
            };
            v += s * x * x;
        }
        if v > 1.0 + 1e-9 {
            return Err(TheoryError::BallViolation { round: idx + 1, value: v });
        }
    }

    let d = trace.feature_ids().len() as f64;
    let sums = trace.grad_sq_sums();
    let lhs1: f64 = sums
        .iter()
        .map(|(id, &gsq)| (ball.s_diag[id] * gsq).sqrt())
        .sum();
    let inner: f64 = sums.iter().map(|(id, &gsq)| ball.s_diag[id] * gsq).sum();
    let mid = d.sqrt() * inner.sqrt();

    // same quantity regrouped by round
    let inner_by_round: f64 = trace
        .rounds
        .iter()
        .map(|r| {
            let ball_mass: f64 =
                r.x.iter().map(|(id, x)| ball.s_diag[&id] * x * x).sum();
            r.g_scalar * r.g_scalar * ball_mass
        })
        .sum();
    let algebra_gap = (inner - inner_by_round).abs();

    let rhs = d.sqrt() * trace.g_scalar_sq_sum().sqrt();
    let step_concavity = InequalityReport::relative(lhs1, mid, 1e-9);
    let step_ball = InequalityReport::relative(mid, rhs, 1e-9);
    let holds = step_concavity.holds
        && step_ball.holds
        && algebra_gap <= 1e-9 * inner.max(1.0);
    Ok(P2Report {
        step_concavity,
        algebra_gap,
        step_ball,
        bound: ball.c * rhs,
        holds,
    })
}

#[derive(Debug, Clone)]
pub struct TheoremReport {
    pub regret: f64,
    pub bound: f64,
    pub holds: bool,
    pub tolerance: f64,
    pub learner_loss: f64,
    pub comparator_loss: f64,
}

/// Transductive bound value 2 sqrt(2) C sum_i sqrt(S_ii sum_j g_ji^2).
pub fn theorem_trans_bound(
    s_diag: &BTreeMap<u32, f64>,
    grad_sq_sums: &BTreeMap<u32, f64>,
    c: f64,
) -> Result<f64, TheoryError> {
    let mut total = 0.0;
    for (&id, &gsq) in grad_sq_sums {
        if gsq == 0.0 {
            continue;
        }
        let s = match s_diag.get(&id) {
            Some(&s) if s > 0.0 => s,
            _ => return Err(TheoryError::MissingScaleEntry(id)),
        };
        total += (s * gsq).sqrt();
    }
    Ok(2.0 * SQRT_2 * c * total)
}

fn require(cond: bool, what: &str) -> Result<(), TheoryError> {
    if cond {
        Ok(())
    } else {
        Err(TheoryError::ConfigMismatch(what.to_string()))
    }
}

/// Transductive theorem: measured regret against the adaptive-conditioner
/// projected run must stay below 2 sqrt(2) C sum_i sqrt(S_ii sum g^2).
/// The run must have used eta = sqrt(2) and the projection step.
pub fn check_theorem_trans(
    run: &CondRunResult,
    comparator: &ComparatorResult,
) -> Result<TheoremReport, TheoryError> {
    require(run.config.kind == ConditionerKind::Transductive, "conditioner kind must be transductive")?;
    require(run.config.project, "projection step must be enabled")?;
    require((run.config.eta - SQRT_2).abs() <= 1e-12, "eta must be sqrt(2)")?;
    let bound = theorem_trans_bound(&run.s_diag, &run.trace.grad_sq_sums(), run.config.c)?;
    let regret = measured_regret(&run.trace, comparator);
    let rep = InequalityReport::relative(regret, bound, 1e-6);
    Ok(TheoremReport {
        regret,
        bound,
        holds: rep.holds,
        tolerance: 1e-6,
        learner_loss: run.total_loss,
        comparator_loss: comparator.total_loss,
    })
}

/// Streaming bound value C sum_i ratio_i (1 + 6 Delta_i + Delta_i^2) / (2 sqrt 2),
/// with ratio_i = sqrt(sum_j g_ji^2) / max_j |x_ji|.
pub fn theorem_stream_bound(
    grad_sq_sums: &BTreeMap<u32, f64>,
    maxabs: &BTreeMap<u32, f64>,
    delta: &BTreeMap<u32, f64>,
    c: f64,
) -> f64 {
    let mut total = 0.0;
    for (&id, &gsq) in grad_sq_sums {
        if gsq == 0.0 {
            continue;
        }
        let ratio = gsq.sqrt() / maxabs[&id];
        let d = delta[&id];
        total += ratio * (1.0 + 6.0 * d + d * d) / (2.0 * SQRT_2);
    }
    c * total
}

pub struct StreamReport {
    pub report: TheoremReport,
    pub delta: BTreeMap<u32, f64>,
}

/// Streaming theorem: the same check against the prefix-ball projected
/// run, with the scale-surprise factors Delta_i measured from the trace.
pub fn check_theorem_stream(
    run: &CondRunResult,
    comparator: &ComparatorResult,
) -> Result<StreamReport, TheoryError> {
    require(run.config.kind == ConditionerKind::Streaming, "conditioner kind must be streaming")?;
    require(run.config.project, "projection step must be enabled")?;
    require((run.config.eta - SQRT_2).abs() <= 1e-12, "eta must be sqrt(2)")?;
    require(run.config.q == QNorm::One, "streaming analysis is for q = 1")?;
    let bound = theorem_stream_bound(
        &run.trace.grad_sq_sums(),
        &run.trace.max_abs(),
        &run.delta,
        run.config.c,
    );
    let regret = measured_regret(&run.trace, comparator);
    let rep = InequalityReport::relative(regret, bound, 1e-6);
    Ok(StreamReport {
        report: TheoremReport {
            regret,
            bound,
            holds: rep.holds,
            tolerance: 1e-6,
            learner_loss: run.total_loss,
            comparator_loss: comparator.total_loss,
        },
        delta: run.delta.clone(),
    })
}

/// The (1-nu)-th quantile of a value multiset, defined as the
/// ceil(T nu)-th largest value.
pub fn quantile_top(values: &[f64], nu: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = ((values.len() as f64) * nu).ceil() as usize;
    sorted[k.clamp(1, values.len()) - 1]
}

/// Single-example regret cap derived from prediction truncation at C.
pub fn r_max_default(loss: Loss, c: f64, max_abs_label: f64) -> Option<f64> {
    match loss {
        Loss::Hinge | Loss::Logistic => Some(c + 1.0),
        Loss::Squared => Some(4.0 * c * c.max(max_abs_label)),
        Loss::ZeroOne => None,
    }
}

#[derive(Debug, Clone)]
pub struct Lemma5Report {
    pub tau: usize,
    pub nu: f64,
    pub delta: f64,
    pub permutations: usize,
    /// Fraction of permutations where every feature reached its (1-nu)
    /// quantile within the first tau examples.
    pub fraction: f64,
    /// (1 - delta) minus a 3 sigma binomial margin.
    pub threshold: f64,
    pub holds: bool,
}

pub fn tau_for(d: usize, nu: f64, delta: f64) -> usize {
    ((d as f64 / delta).ln() / nu).ceil() as usize
}

fn feature_abs_columns(examples: &[Example]) -> BTreeMap<u32, Vec<f64>> {
    let ids: Vec<u32> = {
        let mut ids: Vec<u32> = examples.iter().flat_map(|e| e.features.ids()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let mut cols: BTreeMap<u32, Vec<f64>> =
        ids.iter().map(|&id| (id, Vec::with_capacity(examples.len()))).collect();
    for e in examples {
        for (&id, col) in cols.iter_mut() {
            col.push(e.features.get(id).abs());
        }
    }
    cols
}

/// Percentile lemma Monte-Carlo: over random permutations, how often has
/// every feature shown a value at or above its (1-nu) quantile after tau
/// examples? The lemma promises probability at least 1 - delta.
pub fn check_lemma5(
    examples: &[Example],
    nu: f64,
    delta: f64,
    permutations: usize,
    seed: u64,
) -> Result<Lemma5Report, TheoryError> {
    if examples.is_empty() {
        return Err(TheoryError::EmptyDataset);
    }
    let cols = feature_abs_columns(examples);
    let d = cols.len();
    let tau = tau_for(d, nu, delta);
    let quantiles: BTreeMap<u32, f64> =
        cols.iter().map(|(&id, col)| (id, quantile_top(col, nu))).collect();

    let mut successes = 0usize;
    for m in 0..permutations {
        let permuted = crate::data::permute(examples, seed.wrapping_add(m as u64));
        let horizon = tau.min(permuted.len());
        let ok = quantiles.iter().all(|(&id, &q)| {
            permuted[..horizon]
                .iter()
                .any(|e| e.features.get(id).abs() >= q)
        });
        if ok {
            successes += 1;
        }
    }
    let fraction = successes as f64 / permutations as f64;
    let sigma = (delta * (1.0 - delta) / permutations as f64).sqrt();
    let threshold = (1.0 - delta) - 3.0 * sigma;
    Ok(Lemma5Report {
        tau,
        nu,
        delta,
        permutations,
        fraction,
        threshold,
        holds: fraction >= threshold,
        })
}

#[derive(Debug, Clone)]
pub struct CorollaryConfig {
    pub loss: Loss,
    pub c: f64,
    pub nu: f64,
    pub delta: f64,
    pub permutations: usize,
    pub seed: u64,
    /// Override for the single-example regret cap; derived from the clip
    /// bound C when absent.
    pub r_max: Option<f64>,
    pub comparator_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct CorollaryReport {
    pub lemma5: Lemma5Report,
    pub r_max: f64,
    /// Hard part: regret <= floor(log(d/delta)/nu) R_max + streaming bound
    /// with Delta measured over the first tau examples, on every permutation.
    pub bound_holds_all: bool,
    pub worst_slack: f64,
    /// Soft part: fraction of permutations where every Delta_i is at most
    /// max |x_i| / quantile_i (claimed to hold with probability 1 - delta).
    pub delta_claim_fraction: f64,
}

/// Full permutation corollary: Monte-Carlo percentile check plus the hard
/// regret bound evaluated on every permutation of the dataset.
pub fn check_corollary_permute(
    examples: &[Example],
    cfg: &CorollaryConfig,
) -> Result<CorollaryReport, TheoryError> {
    if examples.is_empty() {
        return Err(TheoryError::EmptyDataset);
    }
    let lemma5 = check_lemma5(examples, cfg.nu, cfg.delta, cfg.permutations, cfg.seed)?;
    let cols = feature_abs_columns(examples);
    let d = cols.len();
    let quantiles: BTreeMap<u32, f64> =
        cols.iter().map(|(&id, col)| (id, quantile_top(col, cfg.nu))).collect();

    let max_abs_label =
        examples.iter().map(|e| e.label.abs()).fold(0.0f64, f64::max);
    let r_max = cfg
        .r_max
        .or_else(|| r_max_default(cfg.loss, cfg.c, max_abs_label))
        .ok_or_else(|| TheoryError::ConfigMismatch("R_max unavailable for this loss".into()))?;

    // the comparator loss is permutation invariant, solve once
    let s_full = empirical_s(examples, PNorm::Inf)?;
    let ball = AdversaryBall { s_diag: s_full, p: PNorm::Inf, c: cfg.c };
    let comparator =
        comparator_loss_with_iterations(examples, cfg.loss, &ball, cfg.comparator_iterations)?;

    let lead_factor = ((d as f64 / cfg.delta).ln() / cfg.nu).floor();
    let tau = lemma5.tau;
    let mut holds_all = true;
    let mut worst_slack = f64::INFINITY;
    let mut delta_claim_hits = 0usize;

    for m in 0..cfg.permutations {
        let permuted = crate::data::permute(examples, cfg.seed.wrapping_add(m as u64));
        let run = run_conditioned(
            &permuted,
            CondRunConfig {
                loss: cfg.loss,
                c: cfg.c,
                eta: SQRT_2,
                q: QNorm::One,
                kind: ConditionerKind::Streaming,
                project: true,
                clip: true,
            },
        )?;

        // Delta over the first tau examples of this permutation
        let horizon = tau.min(permuted.len());
        let mut prefix_max: BTreeMap<u32, f64> = BTreeMap::new();
        for e in &permuted[..horizon] {
            for (id, x) in e.features.iter() {
                let entry = prefix_max.entry(id).or_insert(0.0f64);
                *entry = entry.max(x.abs());
            }
        }
        let full_max = run.trace.max_abs();
        let sums = run.trace.grad_sq_sums();
        let mut tail = 0.0f64;
        let mut delta_claim_ok = true;
        for (&id, &gsq) in &sums {
            if gsq == 0.0 {
                continue;
            }
            let full = full_max[&id];
            let prefix = prefix_max.get(&id).copied().unwrap_or(0.0);
            let delta_i = if prefix > 0.0 { full / prefix } else { f64::INFINITY };
            if delta_i > full / quantiles[&id] + 1e-9 {
                delta_claim_ok = false;
            }
            tail += (gsq.sqrt() / full) * (1.0 + 6.0 * delta_i + delta_i * delta_i)
                / (2.0 * SQRT_2);
        }
        let bound = lead_factor * r_max + cfg.c * tail;
        let regret = measured_regret(&run.trace, &comparator);
        let within = regret <= bound + 1e-6 * bound.abs();
        if !within {
            holds_all = false;
        }
        worst_slack = worst_slack.min(bound - regret);
        if delta_claim_ok {
            delta_claim_hits += 1;
        }
    }

    Ok(CorollaryReport {
        lemma5,
        r_max,
        bound_holds_all: holds_all,
        worst_slack,
        delta_claim_fraction: delta_claim_hits as f64 / cfg.permutations as f64,
    })
}
