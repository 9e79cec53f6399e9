//! The five online learners behind one predict/update interface:
//! NG, NAG and sNAG (scale-invariant), plus diagonal AdaGrad and plain
//! SGD as non-invariant baselines.
//!
//! All five follow the same round shape: rescale per-feature scale
//! trackers, predict, bump the round counters, then take the gradient
//! step. Progressive validation (`run_stream`) always scores the
//! prediction before learning from the example.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::loss::{Loss, LossError};
use crate::projection::{self, ProjectionConfig, QNorm};
use crate::sparse::{Example, SparseVec};
use crate::theory::trace::{RunTrace, TraceRound};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Sgd,
    Adagrad,
    Ng,
    Nag,
    Snag,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Adagrad => "adagrad",
            Algorithm::Ng => "ng",
            Algorithm::Nag => "nag",
            Algorithm::Snag => "snag",
        }
    }

    /// The scale-invariant algorithms.
    pub fn is_normalized(self) -> bool {
        matches!(self, Algorithm::Ng | Algorithm::Nag | Algorithm::Snag)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(Algorithm::Sgd),
            "adagrad" | "ag" => Ok(Algorithm::Adagrad),
            "ng" => Ok(Algorithm::Ng),
            "nag" => Ok(Algorithm::Nag),
            "snag" => Ok(Algorithm::Snag),
            other => Err(LearnerError::UnknownAlgorithm(other.to_string())),
        }
    }
}

/// Optional per-round projection of the weights onto the prefix ball
/// `{w : ||S(t)^{-1/2} w||_q <= C}` with `S(t)` built from the max
/// absolute value of each feature observed so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSettings {
    pub c: f64,
    pub q: QNorm,
}

/// Per-round learning rate schedule. All experiments use a constant
/// rate; the decay hook exists for completeness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EtaSchedule {
    #[default]
    Constant,
    /// eta_t = eta / sqrt(t)
    InvSqrtT,
}

impl FromStr for EtaSchedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(EtaSchedule::Constant),
            "inv-sqrt" | "invsqrt" => Ok(EtaSchedule::InvSqrtT),
            other => Err(format!("unknown eta schedule `{other}`")),
        }
    }
}

impl EtaSchedule {
    pub fn name(self) -> &'static str {
        match self {
            EtaSchedule::Constant => "constant",
            EtaSchedule::InvSqrtT => "inv-sqrt",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    /// Base learning rate.
    pub eta: f64,
    pub schedule: EtaSchedule,
    pub loss: Loss,
    /// Truncate predictions to [-C, C] before scoring and differentiating.
    pub clip_bound: Option<f64>,
    pub projection: Option<ProjectionSettings>,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm, eta: f64, loss: Loss) -> Self {
        Self {
            algorithm,
            eta,
            schedule: EtaSchedule::Constant,
            loss,
            clip_bound: None,
            projection: None,
        }
    }

    /// Learning rate at (post-increment) round t.
    pub fn eta_at(&self, round: u64) -> f64 {
        match self.schedule {
            EtaSchedule::Constant => self.eta,
            EtaSchedule::InvSqrtT => self.eta / (round.max(1) as f64).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if !positive_finite(self.eta) {
            return Err(LearnerError::InvalidEta(self.eta));
        }
        if let Some(c) = self.clip_bound {
            if !positive_finite(c) {
                return Err(LearnerError::InvalidClipBound(c));
            }
        }
        if !self.loss.is_trainable() {
            return Err(LearnerError::Loss(LossError::NotDifferentiable));
        }
        Ok(())
    }
}

fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidEta(f64),
    #[error("clip bound must be positive and finite, got {0}")]
    InvalidClipBound(f64),
    #[error("unknown algorithm `{0}` (expected sgd, adagrad, ng, nag or snag)")]
    UnknownAlgorithm(String),
    #[error("classification loss requires labels in {{-1, +1}}, got {label} at example {index}")]
    InvalidLabel { index: u64, label: f64 },
    #[error("input stream contained no usable examples")]
    EmptyStream,
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Projection(#[from] projection::ProjectionError),
    #[error("input stream error: {0}")]
    Stream(#[from] crate::data::DataError),
}

/// A raw dot-product prediction and its clipped form. `clipped` equals
/// `raw` when no clip bound is configured; losses and gradients are
/// always evaluated at `clipped`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub raw: f64,
    pub clipped: f64,
}

/// Per-feature learner state. `scale` holds the running max |x| for NG
/// and NAG and the running sum of squares for sNAG; `norm_ref` is sNAG's
/// monotone reference normalizer (running max of sqrt(scale / t)).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Slot {
    pub weight: f64,
    pub scale: f64,
    pub grad_sq: f64,
    pub norm_ref: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnerState {
    slots: BTreeMap<u32, Slot>,
    /// Global normalizer N.
    pub norm_sum: f64,
    /// Round counter t.
    pub round: u64,
}

impl LearnerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn weight(&self, id: u32) -> f64 {
        self.slots.get(&id).map_or(0.0, |s| s.weight)
    }

    pub fn slot(&self, id: u32) -> Slot {
        self.slots.get(&id).copied().unwrap_or_default()
    }

    pub fn n_features(&self) -> usize {
        self.slots.len()
    }

    /// Slots in feature-id order.
    pub fn iter_slots(&self) -> impl Iterator<Item = (u32, &Slot)> + '_ {
        self.slots.iter().map(|(&id, s)| (id, s))
    }

    /// Current non-zero weights as a sparse vector.
    pub fn weights(&self) -> SparseVec {
        SparseVec::from_sorted_unchecked(
            self.slots
                .iter()
                .filter(|(_, s)| s.weight != 0.0)
                .map(|(&id, s)| (id, s.weight))
                .collect(),
        )
    }

    /// Used by model loading; asserts ids arrive in raw slot form.
    pub(crate) fn insert_slot(&mut self, id: u32, slot: Slot) {
        self.slots.insert(id, slot);
    }
}

/// Everything one update produced: the scored prediction, the loss of
/// that prediction, the loss derivative g' and the per-feature gradients
/// g'_t * x_ti (support equals the example's support whenever g' != 0).
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub prediction: Prediction,
    pub loss: f64,
    pub gradient_scalar: f64,
    pub per_feature_gradients: SparseVec,
    /// Effective diagonal conditioner of this round's weight step
    /// (the A with delta_w = -A^{-1} g), for tracing.
    pub conditioner_diag: SparseVec,
}

pub fn predict(state: &LearnerState, config: &LearnerConfig, example: &Example) -> Prediction {
    let raw: f64 = example.features.iter().map(|(id, x)| state.weight(id) * x).sum();
    let clipped = match config.clip_bound {
        Some(c) => raw.clamp(-c, c),
        None => raw,
    };
    Prediction { raw, clipped }
}

pub fn update(
    state: &mut LearnerState,
    config: &LearnerConfig,
    example: &Example,
) -> Result<UpdateOutcome, LearnerError> {
    debug_assert!(!example.features.is_empty(), "update requires a non-empty example");
    match config.algorithm {
        Algorithm::Ng => update_ng(state, config, example),
        Algorithm::Nag => update_nag(state, config, example),
        Algorithm::Snag => update_snag(state, config, example),
        Algorithm::Adagrad => update_adagrad(state, config, example),
        Algorithm::Sgd => update_sgd(state, config, example),
    }
}

fn score(
    state: &LearnerState,
    config: &LearnerConfig,
    example: &Example,
) -> Result<(Prediction, f64, f64), LearnerError> {
    let prediction = predict(state, config, example);
    let loss = config.loss.value(prediction.clipped, example.label);
    let g = config.loss.derivative(prediction.clipped, example.label)?;
    Ok((prediction, loss, g))
}

fn gradients(example: &Example, g: f64) -> SparseVec {
    example.features.map_values(|_, x| g * x)
}

/// NG: squash w by (s/|x|)^2 when a feature exceeds its scale, then take
/// a step of size eta * (t/N) / s_i^2 against the gradient.
fn update_ng(
    state: &mut LearnerState,
    config: &LearnerConfig,
    example: &Example,
) -> Result<UpdateOutcome, LearnerError> {
    for (id, x) in example.features.iter() {
        let slot = state.slots.entry(id).or_default();
        let ax = x.abs();
        if ax > slot.scale {
            slot.weight = if slot.scale == 0.0 {
                0.0
            } else {
                slot.weight * (slot.scale * slot.scale) / (x * x)
            };
            slot.scale = ax;
        }
    }

    let (prediction, loss, g) = score(state, config, example)?;

    state.round += 1;
    let mut norm_inc = 0.0;
    for (id, x) in example.features.iter() {
        let s = state.slots[&id].scale;
        norm_inc += (x * x) / (s * s);
    }
    state.norm_sum += norm_inc;

    let t = state.round as f64;
    let eta = config.eta_at(state.round);
    let ratio = t / state.norm_sum;
    let mut cond = Vec::with_capacity(example.features.len());
    for (id, x) in example.features.iter() {
        let slot = state.slots.get_mut(&id).expect("slot created above");
        let s_sq = slot.scale * slot.scale;
        slot.weight -= eta * ratio * (g * x) / s_sq;
        cond.push((id, s_sq * state.norm_sum / (eta * t)));
    }

    Ok(UpdateOutcome {
        prediction,
        loss,
        gradient_scalar: g,
        per_feature_gradients: gradients(example, g),
        conditioner_diag: SparseVec::from_sorted_unchecked(cond),
    })
}

/// NAG: like NG with first-power squash s/|x|, per-feature gradient
/// accumulators G_i, and step eta * sqrt(t/N) / (s_i sqrt(G_i)).
fn update_nag(
    state: &mut LearnerState,
    config: &LearnerConfig,
    example: &Example,
) -> Result<UpdateOutcome, LearnerError> {
    for (id, x) in example.features.iter() {
        let slot = state.slots.entry(id).or_default();
        let ax = x.abs();
        if ax > slot.scale {
            slot.weight = if slot.scale == 0.0 { 0.0 } else { slot.weight * slot.scale / ax };
            slot.scale = ax;
        }
    }

    let (prediction, loss, g) = score(state, config, example)?;

    state.round += 1;
    let mut norm_inc = 0.0;
    for (id, x) in example.features.iter() {
        let s = state.slots[&id].scale;
        norm_inc += (x * x) / (s * s);
    }
    state.norm_sum += norm_inc;

    let t = state.round as f64;
    let factor = config.eta_at(state.round) * (t / state.norm_sum).sqrt();
    let mut cond = Vec::with_capacity(example.features.len());
    for (id, x) in example.features.iter() {
        let slot = state.slots.get_mut(&id).expect("slot created above");
        let gi = g * x;
        slot.grad_sq += gi * gi;
        if slot.grad_sq > 0.0 {
            let denom = slot.scale * slot.grad_sq.sqrt();
            slot.weight -= factor * gi / denom;
            cond.push((id, denom / factor));
        }
    }

    Ok(UpdateOutcome {
        prediction,
        loss,
        gradient_scalar: g,
        per_feature_gradients: gradients(example, g),
        conditioner_diag: SparseVec::from_sorted_unchecked(cond),
    })
}

/// sNAG: NAG with the running max replaced by the root mean square
/// normalizer n_i = sqrt(sum x_i^2 / t). The squash analogue rescales
/// against a monotone reference (the running max of n_i), so a shrinking
/// average never inflates a weight.
fn update_snag(
    state: &mut LearnerState,
    config: &LearnerConfig,
    example: &Example,
) -> Result<UpdateOutcome, LearnerError> {
    for (id, x) in example.features.iter() {
        let slot = state.slots.entry(id).or_default();
        slot.scale += x * x;
    }

    state.round += 1;
    let t = state.round as f64;
    for (id, _) in example.features.iter() {
        let slot = state.slots.get_mut(&id).expect("slot created above");
        let n_new = (slot.scale / t).sqrt();
        if n_new > slot.norm_ref {
            if slot.norm_ref > 0.0 {
                slot.weight *= slot.norm_ref / n_new;
            }
            slot.norm_ref = n_new;
        }
    }

    let (prediction, loss, g) = score(state, config, example)?;

    let mut norm_inc = 0.0;
    for (id, x) in example.features.iter() {
        let s = state.slots[&id].scale;
        norm_inc += (x * x) / (s / t);
    }
    state.norm_sum += norm_inc;

    let factor = config.eta_at(state.round) * (t / state.norm_sum).sqrt();
    let mut cond = Vec::with_capacity(example.features.len());
    for (id, x) in example.features.iter() {
        let slot = state.slots.get_mut(&id).expect("slot created above");
        let gi = g * x;
        slot.grad_sq += gi * gi;
        if slot.grad_sq > 0.0 {
            let n = (slot.scale / t).sqrt();
            let denom = n * slot.grad_sq.sqrt();
            slot.weight -= factor * gi / denom;
            cond.push((id, denom / factor));
        }
    }

    Ok(UpdateOutcome {
        prediction,
        loss,
        gradient_scalar: g,
        per_feature_gradients: gradients(example, g),
        conditioner_diag: SparseVec::from_sorted_unchecked(cond),
    })
}

/// Diagonal AdaGrad baseline: w_i -= eta * g_i / sqrt(G_i). Not scale
/// invariant.
fn update_adagrad(
    state: &mut LearnerState,
    config: &LearnerConfig,
    example: &Example,
) -> Result<UpdateOutcome, LearnerError> {
    let (prediction, loss, g) = score(state, config, example)?;
    state.round += 1;
    let eta = config.eta_at(state.round);

    let mut cond = Vec::with_capacity(example.features.len());
    for (id, x) in example.features.iter() {
        let slot = state.slots.entry(id).or_default();
        let gi = g * x;
        slot.grad_sq += gi * gi;
        if slot.grad_sq > 0.0 {
            let root = slot.grad_sq.sqrt();
            slot.weight -= eta * gi / root;
            cond.push((id, root / eta));
        }
    }

    Ok(UpdateOutcome {
        prediction,
        loss,
        gradient_scalar: g,
        per_feature_gradients: gradients(example, g),
        conditioner_diag: SparseVec::from_sorted_unchecked(cond),
    })
}

/// Plain online gradient descent: w_i -= eta * g_i.
fn update_sgd(
    state: &mut LearnerState,
    config: &LearnerConfig,
    example: &Example,
) -> Result<UpdateOutcome, LearnerError> {
    let (prediction, loss, g) = score(state, config, example)?;
    state.round += 1;
    let eta = config.eta_at(state.round);

    let mut cond = Vec::with_capacity(example.features.len());
    for (id, x) in example.features.iter() {
        let slot = state.slots.entry(id).or_default();
        slot.weight -= eta * (g * x);
        cond.push((id, 1.0 / eta));
    }

    Ok(UpdateOutcome {
        prediction,
        loss,
        gradient_scalar: g,
        per_feature_gradients: gradients(example, g),
        conditioner_diag: SparseVec::from_sorted_unchecked(cond),
    })
}

/// Effective diagonal conditioner over every feature seen so far, used
/// as the projection metric when per-round projection is enabled.
fn effective_metric(state: &LearnerState, config: &LearnerConfig) -> BTreeMap<u32, f64> {
    let t = state.round as f64;
    let eta = config.eta_at(state.round);
    let mut out = BTreeMap::new();
    for (id, slot) in state.iter_slots() {
        let a = match config.algorithm {
            Algorithm::Sgd => 1.0 / eta,
            Algorithm::Adagrad => slot.grad_sq.sqrt() / eta,
            Algorithm::Ng => slot.scale * slot.scale * state.norm_sum / (eta * t),
            Algorithm::Nag => {
                slot.scale * slot.grad_sq.sqrt() * (state.norm_sum / t).sqrt() / eta
            }
            Algorithm::Snag => {
                let n = (slot.scale / t).sqrt();
                n * slot.grad_sq.sqrt() * (state.norm_sum / t).sqrt() / eta
            }
        };
        if a > 0.0 && a.is_finite() {
            out.insert(id, a);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record a full per-round trace.
    pub trace: bool,
    /// Score an extra evaluation metric (e.g. zero-one) progressively.
    pub metric: Option<Loss>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: LearnerState,
    /// Average progressive validation loss (each example scored before
    /// it is trained on).
    pub progressive_loss: f64,
    pub examples_seen: u64,
    pub skipped_empty: u64,
    pub metric_loss: Option<f64>,
    /// Min and max label observed, for worst-case-normalized reporting.
    pub label_range: Option<(f64, f64)>,
    pub trace: Option<RunTrace>,
}

impl RunResult {
    /// Progressive squared loss divided by the worst possible squared
    /// loss (max - min)^2 of the observed labels. None when degenerate.
    pub fn normalized_loss(&self) -> Option<f64> {
        let (lo, hi) = self.label_range?;
        let span = hi - lo;
        if span > 0.0 {
            Some(self.progressive_loss / (span * span))
        } else {
            None
        }
    }
}

/// Streams examples through a fresh learner. See [`resume_stream`] for
/// continuing from saved state.
pub fn run_stream<I>(
    config: &LearnerConfig,
    stream: I,
    opts: RunOptions,
) -> Result<RunResult, LearnerError>
where
    I: IntoIterator<Item = Result<Example, crate::data::DataError>>,
{
    resume_stream(LearnerState::new(), config, stream, opts)
}

/// Streams examples through an existing learner state; the advanced
/// state comes back in the result.
pub fn resume_stream<I>(
    mut state: LearnerState,
    config: &LearnerConfig,
    stream: I,
    opts: RunOptions,
) -> Result<RunResult, LearnerError>
where
    I: IntoIterator<Item = Result<Example, crate::data::DataError>>,
{
    config.validate()?;
    let mut total_loss = 0.0;
    let mut metric_total = 0.0;
    let mut seen = 0u64;
    let mut skipped = 0u64;
    let mut label_range: Option<(f64, f64)> = None;
    let mut rounds = Vec::new();
    let mut prefix_maxabs: BTreeMap<u32, f64> = BTreeMap::new();

    for item in stream {
        let example = item?;
        if example.features.is_empty() {
            skipped += 1;
            continue;
        }
        if config.loss.is_classification() && example.label != 1.0 && example.label != -1.0 {
            return Err(LearnerError::InvalidLabel { index: seen, label: example.label });
        }

        let w_before = if opts.trace { Some(state.weights()) } else { None };
        let outcome = update(&mut state, config, &example)?;
        seen += 1;
        total_loss += outcome.loss;
        if let Some(metric) = opts.metric {
            metric_total += metric.value(outcome.prediction.clipped, example.label);
        }
        label_range = Some(match label_range {
            None => (example.label, example.label),
            Some((lo, hi)) => (lo.min(example.label), hi.max(example.label)),
        });

        if let Some(proj) = &config.projection {
            for (id, x) in example.features.iter() {
                let m = prefix_maxabs.entry(id).or_insert(0.0);
                *m = m.max(x.abs());
            }
            let s_diag: BTreeMap<u32, f64> =
                prefix_maxabs.iter().map(|(&id, &m)| (id, 1.0 / (m * m))).collect();
            let metric = effective_metric(&state, config);
            let cfg = ProjectionConfig { c: proj.c, q: proj.q, s_diag };
            let projected = projection::project(&state.weights(), &metric, &cfg)?;
            for (id, slot) in state.slots.iter_mut() {
                slot.weight = projected.get(*id);
            }
        }

        if let Some(w) = w_before {
            rounds.push(TraceRound {
                x: example.features.clone(),
                y: example.label,
                yhat: outcome.prediction.clipped,
                loss: outcome.loss,
                g_scalar: outcome.gradient_scalar,
                g: outcome.per_feature_gradients.clone(),
                a_diag: outcome.conditioner_diag.clone(),
                w,
            });
        }
    }

    if seen == 0 {
        return Err(LearnerError::EmptyStream);
    }

    Ok(RunResult {
        state,
        progressive_loss: total_loss / seen as f64,
        examples_seen: seen,
        skipped_empty: skipped,
        metric_loss: opts.metric.map(|_| metric_total / seen as f64),
        label_range,
        trace: if opts.trace { Some(RunTrace { rounds }) } else { None },
    })
}

/// Convenience wrapper over an in-memory slice.
pub fn run_on(
    config: &LearnerConfig,
    examples: &[Example],
    opts: RunOptions,
) -> Result<RunResult, LearnerError> {
    run_stream(config, examples.iter().cloned().map(Ok), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseVec;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ex(pairs: &[(u32, f64)], label: f64) -> Example {
        Example::new(SparseVec::from_pairs(pairs.iter().copied()).unwrap(), label)
    }

    fn cfg(algorithm: Algorithm, eta: f64) -> LearnerConfig {
        LearnerConfig::new(algorithm, eta, Loss::Squared)
    }

    #[test]
    fn predict_fixtures() {
        let mut state = LearnerState::new();
        let c = cfg(Algorithm::Sgd, 1.0);
        assert_eq!(predict(&state, &c, &ex(&[(0, 3.0)], 0.0)).raw, 0.0);

        state.insert_slot(1, Slot { weight: 0.5, ..Default::default() });
        assert_eq!(predict(&state, &c, &ex(&[(1, 2.0)], 0.0)).raw, 1.0);

        let mut clipped = cfg(Algorithm::Sgd, 1.0);
        clipped.clip_bound = Some(1.0);
        state.insert_slot(1, Slot { weight: 1.5, ..Default::default() });
        let p = predict(&state, &clipped, &ex(&[(1, 2.0)], 0.0));
        assert_eq!(p.raw, 3.0);
        assert_eq!(p.clipped, 1.0);
    }

    #[test]
    fn ng_first_step() {
        let mut state = LearnerState::new();
        let c = cfg(Algorithm::Ng, 0.5);
        let out = update(&mut state, &c, &ex(&[(1, 2.0)], 1.0)).unwrap();
        let slot = state.slot(1);
        assert_eq!(slot.scale, 2.0);
        assert_eq!(state.norm_sum, 1.0);
        assert_eq!(state.round, 1);
        assert_eq!(out.gradient_scalar, -2.0);
        assert!((slot.weight - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ng_zero_gradient_keeps_weights() {
        let mut state = LearnerState::new();
        let c = cfg(Algorithm::Ng, 0.5);
        let out = update(&mut state, &c, &ex(&[(1, 1.0)], 0.0)).unwrap();
        assert_eq!(out.gradient_scalar, 0.0);
        assert_eq!(state.weight(1), 0.0);
    }

    #[test]
    fn ng_squash_preserves_w_times_s_squared() {
        let mut state = LearnerState::new();
        state.insert_slot(1, Slot { weight: 0.5, scale: 2.0, ..Default::default() });
        // post-squash prediction is 0.125 * 4 = 0.5; label 0.5 makes g' = 0
        // so the final weight is exactly the squashed weight
        let c = cfg(Algorithm::Ng, 0.5);
        update(&mut state, &c, &ex(&[(1, 4.0)], 0.5)).unwrap();
        let slot = state.slot(1);
        assert!((slot.weight - 0.125).abs() < 1e-12);
        assert_eq!(slot.scale, 4.0);
        assert!((slot.weight * slot.scale * slot.scale - 0.5 * 2.0 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn nag_first_step() {
        let mut state = LearnerState::new();
        let c = cfg(Algorithm::Nag, 0.5);
        update(&mut state, &c, &ex(&[(1, 2.0)], 1.0)).unwrap();
        let slot = state.slot(1);
        assert_eq!(slot.scale, 2.0);
        assert_eq!(slot.grad_sq, 16.0);
        assert!((slot.weight - 0.25).abs() < 1e-12);
    }

    #[test]
    fn nag_squash_preserves_w_times_s() {
        let mut state = LearnerState::new();
        state.insert_slot(1, Slot { weight: 0.5, scale: 2.0, grad_sq: 1.0, ..Default::default() });
        // squashed weight 0.25, prediction 0.25 * 4 = 1, label 1 -> g' = 0
        let c = cfg(Algorithm::Nag, 0.5);
        update(&mut state, &c, &ex(&[(1, 4.0)], 1.0)).unwrap();
        let slot = state.slot(1);
        assert!((slot.weight * slot.scale - 0.5 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn nag_two_identical_rounds() {
        let mut state = LearnerState::new();
        let c = cfg(Algorithm::Nag, 1.0);
        let e = ex(&[(1, 1.0)], 1.0);
        let out1 = update(&mut state, &c, &e).unwrap();
        assert_eq!(out1.loss, 1.0);
        assert!((state.weight(1) - 1.0).abs() < 1e-12);
        let out2 = update(&mut state, &c, &e).unwrap();
        assert_eq!(out2.loss, 0.0);
        assert!((state.weight(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snag_first_step_matches_nag() {
        let mut state = LearnerState::new();
        let c = cfg(Algorithm::Snag, 0.5);
        update(&mut state, &c, &ex(&[(1, 2.0)], 1.0)).unwrap();
        let slot = state.slot(1);
        assert_eq!(slot.scale, 4.0); // sum of squares
        assert!((slot.weight - 0.25).abs() < 1e-12);
    }

    #[test]
    fn snag_equals_nag_on_constant_feature_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c_val = 2.5;
        let examples: Vec<Example> =
            (0..100).map(|_| ex(&[(0, c_val)], rng.random_range(-1.0..1.0))).collect();
        let nag = run_on(&cfg(Algorithm::Nag, 0.3), &examples, RunOptions::default()).unwrap();
        let snag = run_on(&cfg(Algorithm::Snag, 0.3), &examples, RunOptions::default()).unwrap();
        assert!((nag.progressive_loss - snag.progressive_loss).abs() < 1e-12);
        assert!((nag.state.weight(0) - snag.state.weight(0)).abs() < 1e-12);
    }

    #[test]
    fn adagrad_first_step() {
        let mut state = LearnerState::new();
        let c = cfg(Algorithm::Adagrad, 0.5);
        update(&mut state, &c, &ex(&[(1, 2.0)], 1.0)).unwrap();
        let slot = state.slot(1);
        assert_eq!(slot.grad_sq, 16.0);
        assert!((slot.weight - 0.5).abs() < 1e-12);
    }

    /// Non-invariance witness: a two-feature dataset where scaling
    /// feature 0 by 100 moves the round-10 prediction by more than 10%
    /// relative. SGD fails the same way.
    #[test]
    fn adagrad_and_sgd_are_not_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base: Vec<Example> = (0..10)
            .map(|_| {
                let x0 = rng.random_range(0.5..1.5);
                let x1 = rng.random_range(0.5..1.5);
                ex(&[(0, x0), (1, x1)], x0 + x1)
            })
            .collect();
        let scaled: Vec<Example> = base
            .iter()
            .map(|e| {
                Example::new(
                    e.features.map_values(|id, v| if id == 0 { 100.0 * v } else { v }),
                    e.label,
                )
            })
            .collect();
        for algo in [Algorithm::Adagrad, Algorithm::Sgd] {
            let c = cfg(algo, 0.05);
            let mut s1 = LearnerState::new();
            let mut s2 = LearnerState::new();
            let mut last_gap = 0.0;
            for (a, b) in base.iter().zip(&scaled) {
                let o1 = update(&mut s1, &c, a).unwrap();
                let o2 = update(&mut s2, &c, b).unwrap();
                last_gap = (o1.prediction.raw - o2.prediction.raw).abs()
                    / o1.prediction.raw.abs().max(1e-12);
            }
            assert!(
                last_gap > 0.10,
                "{algo}: round-10 prediction gap {last_gap:.4} should exceed 10%"
            );
        }
    }

    #[test]
    fn sgd_first_step_and_zero_eta_rejected() {
        let mut state = LearnerState::new();
        let c = cfg(Algorithm::Sgd, 0.1);
        update(&mut state, &c, &ex(&[(1, 2.0)], 1.0)).unwrap();
        assert!((state.weight(1) - 0.4).abs() < 1e-15);

        let bad = cfg(Algorithm::Sgd, 0.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_gradient_is_a_weight_noop_everywhere() {
        for algo in [Algorithm::Sgd, Algorithm::Adagrad, Algorithm::Ng, Algorithm::Nag, Algorithm::Snag] {
            let c = cfg(algo, 0.7);
            let mut state = LearnerState::new();
            // squared loss with label 0 and prediction 0: g' = 0
            let out = update(&mut state, &c, &ex(&[(0, 2.0)], 0.0)).unwrap();
            assert_eq!(out.gradient_scalar, 0.0);
            assert_eq!(state.weight(0), 0.0, "{algo}: weight moved on zero gradient");
            assert!(out.per_feature_gradients.is_empty());
        }
    }

    #[test]
    fn stream_errors_propagate() {
        let c = cfg(Algorithm::Sgd, 0.1);
        let items: Vec<Result<Example, crate::data::DataError>> = vec![
            Ok(ex(&[(0, 1.0)], 1.0)),
            Err(crate::data::DataError::Parse { line: 2, what: "bad token".into() }),
        ];
        let err = run_stream(&c, items, RunOptions::default()).unwrap_err();
        assert!(matches!(err, LearnerError::Stream(_)));
    }

    #[test]
    fn inv_sqrt_schedule_decays_steps() {
        let mut c = cfg(Algorithm::Sgd, 0.1);
        c.schedule = EtaSchedule::InvSqrtT;
        let mut state = LearnerState::new();
        let e = ex(&[(1, 1.0)], 10.0); // g' = 2(yhat - 10)
        update(&mut state, &c, &e).unwrap();
        // round 1: w = 0.1 * 20 = 2
        assert!((state.weight(1) - 2.0).abs() < 1e-12);
        update(&mut state, &c, &e).unwrap();
        // round 2: g' = 2(2 - 10) = -16, step = (0.1/sqrt(2)) * 16
        let expect = 2.0 + 0.1 / 2f64.sqrt() * 16.0;
        assert!((state.weight(1) - expect).abs() < 1e-12);
    }

    #[test]
    fn ng_reduces_to_sgd_on_unit_scale_single_feature() {
        // with one feature and |x| = 1 everywhere, s = 1 and N = t exactly,
        // so every NG step is bitwise an SGD step
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let examples: Vec<Example> = (0..200)
            .map(|_| {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                ex(&[(0, sign)], rng.random_range(-2.0..2.0))
            })
            .collect();
        let mut ng_state = LearnerState::new();
        let mut sgd_state = LearnerState::new();
        let ng_cfg = cfg(Algorithm::Ng, 0.37);
        let sgd_cfg = cfg(Algorithm::Sgd, 0.37);
        for e in &examples {
            update(&mut ng_state, &ng_cfg, e).unwrap();
            update(&mut sgd_state, &sgd_cfg, e).unwrap();
            assert_eq!(ng_state.weight(0).to_bits(), sgd_state.weight(0).to_bits());
        }
    }

    #[test]
    fn monotone_accumulators() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for algo in [Algorithm::Ng, Algorithm::Nag, Algorithm::Snag, Algorithm::Adagrad] {
            let c = cfg(algo, 0.2);
            let mut state = LearnerState::new();
            let mut prev_n = 0.0;
            let mut prev_t = 0;
            let mut prev_slots: BTreeMap<u32, Slot> = BTreeMap::new();
            for _ in 0..100 {
                let d = rng.random_range(1..4);
                let pairs: Vec<(u32, f64)> = (0..d)
                    .map(|i| (i, rng.random_range(0.1..50.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }))
                    .collect();
                let e = ex(&pairs, rng.random_range(-1.0..1.0));
                update(&mut state, &c, &e).unwrap();
                assert!(state.norm_sum >= prev_n);
                assert_eq!(state.round, prev_t + 1);
                for (id, slot) in state.iter_slots() {
                    let old = prev_slots.get(&id).copied().unwrap_or_default();
                    assert!(slot.scale >= old.scale, "{algo}: scale shrank");
                    assert!(slot.grad_sq >= old.grad_sq, "{algo}: grad_sq shrank");
                }
                prev_n = state.norm_sum;
                prev_t = state.round;
                prev_slots = state.iter_slots().map(|(id, s)| (id, *s)).collect();
            }
        }
    }

    #[test]
    fn run_stream_progressive_loss() {
        let e = ex(&[(1, 1.0)], 1.0);
        let res =
            run_on(&cfg(Algorithm::Nag, 1.0), &[e.clone(), e], RunOptions::default()).unwrap();
        assert!((res.progressive_loss - 0.5).abs() < 1e-12);
        assert_eq!(res.examples_seen, 2);
    }

    #[test]
    fn run_stream_single_example_loss_is_at_zero_prediction() {
        let res = run_on(&cfg(Algorithm::Ng, 0.5), &[ex(&[(0, 3.0)], 2.0)], RunOptions::default())
            .unwrap();
        assert_eq!(res.progressive_loss, 4.0); // squared loss of 0 vs 2
    }

    #[test]
    fn run_stream_skips_empty_examples() {
        let empty = Example::new(SparseVec::new(), 1.0);
        let res = run_on(
            &cfg(Algorithm::Sgd, 0.1),
            &[empty.clone(), ex(&[(0, 1.0)], 1.0), empty],
            RunOptions::default(),
        )
        .unwrap();
        assert_eq!(res.skipped_empty, 2);
        assert_eq!(res.examples_seen, 1);
    }

    #[test]
    fn run_stream_rejects_bad_classification_labels() {
        let c = LearnerConfig::new(Algorithm::Nag, 0.5, Loss::Hinge);
        let err = run_on(&c, &[ex(&[(0, 1.0)], 0.5)], RunOptions::default()).unwrap_err();
        assert!(matches!(err, LearnerError::InvalidLabel { .. }));
    }

    #[test]
    fn run_stream_empty_stream_fails() {
        let res = run_on(&cfg(Algorithm::Sgd, 0.1), &[], RunOptions::default());
        assert!(matches!(res, Err(LearnerError::EmptyStream)));
    }

    fn scale_example(e: &Example, scales: &BTreeMap<u32, f64>) -> Example {
        Example::new(e.features.map_values(|id, v| v * scales[&id]), e.label)
    }

    #[test]
    fn normalized_learners_are_scale_invariant_smoke() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = 5u32;
        let examples: Vec<Example> = (0..200)
            .map(|_| {
                let mut pairs: Vec<(u32, f64)> = Vec::new();
                for i in 0..d {
                    if rng.random_bool(0.8) {
                        let v = rng.random_range(-2.0..2.0);
                        if v != 0.0 {
                            pairs.push((i, v));
                        }
                    }
                }
                Example::new(SparseVec::from_pairs(pairs).unwrap(), rng.random_range(-1.0..1.0))
            })
            .filter(|e| !e.features.is_empty())
            .collect();
        let scales: BTreeMap<u32, f64> =
            (0..d).map(|i| (i, 10f64.powf(rng.random_range(-3.0..3.0)))).collect();
        let scaled: Vec<Example> = examples.iter().map(|e| scale_example(e, &scales)).collect();

        for algo in [Algorithm::Ng, Algorithm::Nag, Algorithm::Snag] {
            let c = cfg(algo, 0.4);
            let mut s1 = LearnerState::new();
            let mut s2 = LearnerState::new();
            for (a, b) in examples.iter().zip(&scaled) {
                let o1 = update(&mut s1, &c, a).unwrap();
                let o2 = update(&mut s2, &c, b).unwrap();
                let tol = 1e-6 * o1.prediction.raw.abs().max(o2.prediction.raw.abs()).max(1e-3);
                assert!(
                    (o1.prediction.raw - o2.prediction.raw).abs() <= tol,
                    "{algo}: predictions diverged"
                );
            }
            for (id, slot) in s1.iter_slots() {
                let expect = slot.weight / scales[&id];
                let got = s2.weight(id);
                let tol = 1e-6 * expect.abs().max(got.abs()).max(1e-9);
                assert!((expect - got).abs() <= tol, "{algo}: weight mismatch at {id}");
            }
        }
    }

    #[test]
    fn projection_keeps_iterates_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut c = cfg(Algorithm::Nag, 2.0);
        c.projection = Some(ProjectionSettings { c: 0.5, q: QNorm::One });
        let examples: Vec<Example> = (0..50)
            .map(|_| {
                ex(
                    &[(0, rng.random_range(0.5..2.0)), (1, rng.random_range(0.5..2.0))],
                    rng.random_range(-3.0..3.0),
                )
            })
            .collect();
        let mut maxabs: BTreeMap<u32, f64> = BTreeMap::new();
        let res = run_on(&c, &examples, RunOptions::default()).unwrap();
        for e in &examples {
            for (id, x) in e.features.iter() {
                let m = maxabs.entry(id).or_insert(0.0);
                *m = m.max(x.abs());
            }
        }
        let norm: f64 =
            res.state.weights().iter().map(|(id, w)| w.abs() * maxabs[&id]).sum();
        assert!(norm <= 0.5 * (1.0 + 1e-9), "final weights infeasible: {}", norm);
    }
}
