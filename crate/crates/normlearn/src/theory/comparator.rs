//! The constrained comparator: the best fixed predictor within the
//! bounded-output class, found by projected subgradient. The class has
//! no closed-form minimizer in general, so a fixed, fully deterministic
//! schedule (200k iterations, diminishing steps, averaged iterates) is
//! used and its solution quality is itself validated against grid search
//! on tiny instances in the tests.

use std::collections::BTreeMap;

use crate::loss::Loss;
use crate::projection::{self, ProjectionConfig};
use crate::sparse::{Example, SparseVec};
use crate::theory::adversary::AdversaryBall;
use crate::theory::trace::RunTrace;
use crate::theory::TheoryError;

pub const COMPARATOR_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone)]
pub struct ComparatorResult {
    pub w_best: SparseVec,
    pub total_loss: f64,
}

fn total_loss(examples: &[Example], loss: Loss, w: &SparseVec) -> f64 {
    examples
        .iter()
        .map(|e| loss.value(w.dot(&e.features), e.label))
        .sum()
}

fn subgradient(
    examples: &[Example],
    loss: Loss,
    w: &SparseVec,
) -> Result<BTreeMap<u32, f64>, TheoryError> {
    let mut g: BTreeMap<u32, f64> = BTreeMap::new();
    for e in examples {
        let d = loss.derivative(w.dot(&e.features), e.label)?;
        if d == 0.0 {
            continue;
        }
        for (id, x) in e.features.iter() {
            *g.entry(id).or_insert(0.0) += d * x;
        }
    }
    Ok(g)
}

/// Minimizes the cumulative loss over `{w : ||S^{-1/2} w||_q <= C}`.
pub fn comparator_loss(
    examples: &[Example],
    loss: Loss,
    ball: &AdversaryBall,
) -> Result<ComparatorResult, TheoryError> {
    comparator_loss_with_iterations(examples, loss, ball, COMPARATOR_ITERATIONS)
}

pub fn comparator_loss_with_iterations(
    examples: &[Example],
    loss: Loss,
    ball: &AdversaryBall,
    iterations: usize,
) -> Result<ComparatorResult, TheoryError> {
    if examples.is_empty() {
        return Err(TheoryError::EmptyDataset);
    }
    let proj_cfg: ProjectionConfig = ball.comparator_projection();
    // restrict to features that actually occur; everything else is
    // optimally zero and free under the constraint
    let ids: Vec<u32> = {
        let mut ids: Vec<u32> =
            examples.iter().flat_map(|e| e.features.ids()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    for &id in &ids {
        if !matches!(proj_cfg.s_diag.get(&id), Some(&s) if s > 0.0) {
            return Err(TheoryError::MissingScaleEntry(id));
        }
    }
    let unit_metric: BTreeMap<u32, f64> = ids.iter().map(|&id| (id, 1.0)).collect();
    // Euclidean diameter of the ball: |w_i| <= C sqrt(S_ii) under both norms
    let diameter = 2.0
        * ball.c
        * ids
            .iter()
            .map(|id| proj_cfg.s_diag[id].sqrt())
            .fold(0.0f64, f64::max)
        * (ids.len() as f64).sqrt();

    let mut w = SparseVec::new();
    let mut best = ComparatorResult { w_best: w.clone(), total_loss: total_loss(examples, loss, &w) };
    let mut avg: BTreeMap<u32, f64> = BTreeMap::new();
    let mut grad_norm_max = 1e-12f64;
    let eval_every = (iterations / 500).max(1);

    for k in 1..=iterations {
        let g = subgradient(examples, loss, &w)?;
        let norm = g.values().map(|v| v * v).sum::<f64>().sqrt();
        grad_norm_max = grad_norm_max.max(norm);
        let step = diameter / (grad_norm_max * (k as f64).sqrt());
        let moved = SparseVec::from_pairs(ids.iter().map(|&id| {
            (id, w.get(id) - step * g.get(&id).copied().unwrap_or(0.0))
        }))
        .expect("unique ids");
        w = projection::project(&moved, &unit_metric, &proj_cfg)?;

        for &id in &ids {
            *avg.entry(id).or_insert(0.0) += w.get(id);
        }

        if k % eval_every == 0 || k == iterations {
            let candidate_avg =
                SparseVec::from_map(&avg.iter().map(|(&id, &v)| (id, v / k as f64)).collect());
            for cand in [&w, &candidate_avg] {
                let l = total_loss(examples, loss, cand);
                if l < best.total_loss {
                    best = ComparatorResult { w_best: cand.clone(), total_loss: l };
                }
            }
        }
    }
    Ok(best)
}

/// Cumulative traced loss minus the comparator's total loss. May be
/// negative when the learner beat the constrained comparator.
pub fn measured_regret(trace: &RunTrace, comparator: &ComparatorResult) -> f64 {
    trace.total_loss() - comparator.total_loss
}
