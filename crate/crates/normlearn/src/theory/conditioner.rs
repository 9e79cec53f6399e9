//! Diagonal conditioners: the best fixed choice in hindsight, the
//! minimax choice over the bounded-output comparator class, and the
//! adaptive per-round versions (transductive and streaming) together
//! with the projected runner that drives them.

use std::collections::BTreeMap;

use crate::loss::Loss;
use crate::projection::{self, ProjectionConfig, QNorm};
use crate::sparse::{Example, SparseVec};
use crate::theory::adversary::AdversaryBall;
use crate::theory::trace::{RunTrace, TraceRound};
use crate::theory::TheoryError;

/// Best fixed diagonal in hindsight: A*_ii = sqrt(sum_t g_ti^2) / |w*_i|,
/// with implied regret bound sum_i |w*_i| sqrt(sum_t g_ti^2).
#[derive(Debug, Clone)]
pub struct HindsightResult {
    pub a_diag: BTreeMap<u32, f64>,
    pub bound: f64,
}

pub fn hindsight_conditioner(
    trace: &RunTrace,
    w_star: &SparseVec,
) -> Result<HindsightResult, TheoryError> {
    let sums = trace.grad_sq_sums();
    let mut unbounded = Vec::new();
    let mut a_diag = BTreeMap::new();
    let mut bound = 0.0;
    for (&id, &gsq) in &sums {
        if gsq == 0.0 {
            continue;
        }
        let w = w_star.get(id);
        if w == 0.0 {
            unbounded.push(id);
            continue;
        }
        a_diag.insert(id, gsq.sqrt() / w.abs());
        bound += w.abs() * gsq.sqrt();
    }
    if !unbounded.is_empty() {
        return Err(TheoryError::UnboundedCoordinate(unbounded));
    }
    Ok(HindsightResult { a_diag, bound })
}

/// Minimax hindsight diagonal over the comparator ball:
/// A*_ii = (1/C) sqrt(sum_t g_ti^2 / S_ii), with regret bound
/// C sum_i sqrt(S_ii sum_t g_ti^2). For the max-norm ball the same
/// numbers in terms of feature ranges are reported alongside.
#[derive(Debug, Clone)]
pub struct MinimaxResult {
    pub a_diag: BTreeMap<u32, f64>,
    pub bound: f64,
    /// A*_ii = (1/C) sqrt(sum g^2) * max_t |x_ti| from the trace inputs.
    pub a_diag_range: BTreeMap<u32, f64>,
    /// C sum_i sqrt(sum g^2) / max_t |x_ti| from the trace inputs.
    pub bound_range: f64,
}

pub fn minimax_conditioner(
    trace: &RunTrace,
    ball: &AdversaryBall,
) -> Result<MinimaxResult, TheoryError> {
    let sums = trace.grad_sq_sums();
    let maxabs = trace.max_abs();
    let mut a_diag = BTreeMap::new();
    let mut a_diag_range = BTreeMap::new();
    let mut bound = 0.0;
    let mut bound_range = 0.0;
    for (&id, &gsq) in &sums {
        if gsq == 0.0 {
            continue;
        }
        let s = match ball.s_diag.get(&id) {
            Some(&s) if s > 0.0 => s,
            _ => return Err(TheoryError::MissingScaleEntry(id)),
        };
        a_diag.insert(id, (gsq / s).sqrt() / ball.c);
        bound += (s * gsq).sqrt();
        if let Some(&m) = maxabs.get(&id) {
            a_diag_range.insert(id, gsq.sqrt() * m / ball.c);
            bound_range += gsq.sqrt() / m;
        }
    }
    Ok(MinimaxResult {
        a_diag,
        bound: ball.c * bound,
        a_diag_range,
        bound_range: ball.c * bound_range,
    })
}

/// Transductive adaptive row: A_{t,ii} = (1/(C eta)) sqrt(cum_i / S_ii)
/// from the gradient prefix sums (inclusive of the current round).
pub fn transductive_conditioner_row(
    cum_grad_sq: &BTreeMap<u32, f64>,
    s_diag: &BTreeMap<u32, f64>,
    c: f64,
    eta: f64,
) -> Result<BTreeMap<u32, f64>, TheoryError> {
    let mut row = BTreeMap::new();
    for (&id, &cum) in cum_grad_sq {
        if cum == 0.0 {
            continue;
        }
        let s = match s_diag.get(&id) {
            Some(&s) if s > 0.0 => s,
            _ => return Err(TheoryError::MissingScaleEntry(id)),
        };
        row.insert(id, (cum / s).sqrt() / (c * eta));
    }
    Ok(row)
}

/// Streaming adaptive row: A_{t,ii} = (1/(C eta)) sqrt(cum_i) * max_{j<=t} |x_ji|.
pub fn streaming_conditioner_row(
    cum_grad_sq: &BTreeMap<u32, f64>,
    prefix_maxabs: &BTreeMap<u32, f64>,
    c: f64,
    eta: f64,
) -> Result<BTreeMap<u32, f64>, TheoryError> {
    let mut row = BTreeMap::new();
    for (&id, &cum) in cum_grad_sq {
        if cum == 0.0 {
            continue;
        }
        let m = match prefix_maxabs.get(&id) {
            Some(&m) if m > 0.0 => m,
            _ => return Err(TheoryError::MissingScaleEntry(id)),
        };
        row.insert(id, cum.sqrt() * m / (c * eta));
    }
    Ok(row)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionerKind {
    /// Two passes: S fixed from the whole dataset, then adaptive gradient
    /// sums only.
    Transductive,
    /// One pass: both the gradient sums and the feature ranges grow with
    /// the observed prefix; projection uses the prefix ball S(t).
    Streaming,
}

#[derive(Debug, Clone, Copy)]
pub struct CondRunConfig {
    pub loss: Loss,
    pub c: f64,
    pub eta: f64,
    pub q: QNorm,
    pub kind: ConditionerKind,
    pub project: bool,
    /// Truncate predictions to [-C, C] before scoring, as the permutation
    /// corollary's single-round regret cap assumes.
    pub clip: bool,
}

#[derive(Debug, Clone)]
pub struct CondRunResult {
    pub config: CondRunConfig,
    pub trace: RunTrace,
    /// The S used by the conditioner: full-pass empirical S for the
    /// transductive kind, final prefix S for the streaming kind.
    pub s_diag: BTreeMap<u32, f64>,
    pub total_loss: f64,
    pub final_weights: SparseVec,
    /// Streaming scale surprise per feature: max_t |x_ti| / |x at first
    /// non-zero occurrence|.
    pub delta: BTreeMap<u32, f64>,
}

/// Runs `w_{t+1} = Pi(w_t - A_t^{-1} g_t)` with the adaptive conditioner
/// of the configured kind, recording a full trace.
pub fn run_conditioned(
    examples: &[Example],
    config: CondRunConfig,
) -> Result<CondRunResult, TheoryError> {
    if examples.is_empty() {
        return Err(TheoryError::EmptyDataset);
    }
    let full_s = crate::theory::adversary::empirical_s(examples, crate::theory::PNorm::Inf)?;

    let mut weights: BTreeMap<u32, f64> = BTreeMap::new();
    let mut cum_grad_sq: BTreeMap<u32, f64> = BTreeMap::new();
    let mut prefix_maxabs: BTreeMap<u32, f64> = BTreeMap::new();
    let mut first_abs: BTreeMap<u32, f64> = BTreeMap::new();
    let mut rounds = Vec::with_capacity(examples.len());
    let mut total_loss = 0.0;

    for example in examples {
        if example.features.is_empty() {
            continue;
        }
        let w_before = SparseVec::from_map(&weights);
        let raw: f64 = example.features.iter().map(|(id, x)| w_before.get(id) * x).sum();
        let yhat = if config.clip { raw.clamp(-config.c, config.c) } else { raw };
        let loss = config.loss.value(yhat, example.label);
        let g_scalar = config.loss.derivative(yhat, example.label)?;
        let g = example.features.map_values(|_, x| g_scalar * x);
        total_loss += loss;

        for (id, x) in example.features.iter() {
            let m = prefix_maxabs.entry(id).or_insert(0.0f64);
            *m = m.max(x.abs());
            first_abs.entry(id).or_insert_with(|| x.abs());
        }
        for (id, gi) in g.iter() {
            *cum_grad_sq.entry(id).or_insert(0.0) += gi * gi;
        }

        let a_row = match config.kind {
            ConditionerKind::Transductive => {
                transductive_conditioner_row(&cum_grad_sq, &full_s, config.c, config.eta)?
            }
            ConditionerKind::Streaming => {
                streaming_conditioner_row(&cum_grad_sq, &prefix_maxabs, config.c, config.eta)?
            }
        };

        for (id, gi) in g.iter() {
            let a = a_row[&id]; // positive: cum includes this round's gi^2 != 0
            *weights.entry(id).or_insert(0.0) -= gi / a;
        }

        if config.project {
            let s_diag = match config.kind {
                ConditionerKind::Transductive => full_s.clone(),
                ConditionerKind::Streaming => prefix_maxabs
                    .iter()
                    .map(|(&id, &m)| (id, 1.0 / (m * m)))
                    .collect(),
            };
            let cfg = ProjectionConfig { c: config.c, q: config.q, s_diag };
            let projected =
                projection::project(&SparseVec::from_map(&weights), &a_row, &cfg)?;
            for v in weights.values_mut() {
                *v = 0.0;
            }
            for (id, v) in projected.iter() {
                weights.insert(id, v);
            }
        }

        rounds.push(TraceRound {
            x: example.features.clone(),
            y: example.label,
            yhat,
            loss,
            g_scalar,
            g,
            a_diag: SparseVec::from_map(&a_row),
            w: w_before,
        });
    }

    if rounds.is_empty() {
        return Err(TheoryError::EmptyDataset);
    }

    let delta = first_abs
        .iter()
        .map(|(&id, &first)| (id, prefix_maxabs[&id] / first))
        .collect();
    let s_diag = match config.kind {
        ConditionerKind::Transductive => full_s,
        ConditionerKind::Streaming => {
            prefix_maxabs.iter().map(|(&id, &m)| (id, 1.0 / (m * m))).collect()
        }
    };

    Ok(CondRunResult {
        config,
        trace: RunTrace { rounds },
        s_diag,
        total_loss,
        final_weights: SparseVec::from_map(&weights),
        delta,
    })
}
