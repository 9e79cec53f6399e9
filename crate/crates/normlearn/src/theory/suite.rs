//! Named, seeded check bundles behind the `verify` command: each one
//! generates its own instances, runs the matching verifier and reports
//! key=value lines plus an overall pass flag.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::learner::{self, Algorithm, LearnerConfig};
use crate::loss::Loss;
use crate::projection::{self, oracle, scaled_norm, ProjectionConfig, QNorm};
use crate::sparse::{Example, SparseVec};
use crate::theory::adversary::{empirical_s, AdversaryBall, PNorm};
use crate::theory::checks::{
    check_corollary_permute, check_lemma1, check_lemma5, check_lemma_adaptive_grad,
    check_p2_bound, check_theorem_stream, check_theorem_trans, theorem_trans_bound,
    CorollaryConfig, SQRT_2,
};
use crate::theory::comparator::{comparator_loss_with_iterations, COMPARATOR_ITERATIONS};
use crate::theory::conditioner::{run_conditioned, CondRunConfig, ConditionerKind};
use crate::theory::TheoryError;
use crate::data::synth::{SyntheticKind, SyntheticSpec};

#[derive(Debug, Clone)]
pub struct SuiteCheck {
    pub name: &'static str,
    pub seed: u64,
    pub passed: bool,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub n: Option<usize>,
    pub seed: u64,
    pub comparator_iterations: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { n: None, seed: 1, comparator_iterations: COMPARATOR_ITERATIONS }
    }
}

pub const CHECK_NAMES: &[&str] = &[
    "invariance",
    "lemma1",
    "lemma4",
    "lemma5",
    "corollary",
    "theorem1",
    "theorem2",
    "p2",
    "projection",
];

pub fn run_named(name: &str, opts: &SuiteOptions) -> Result<SuiteCheck, TheoryError> {
    let n = opts.n;
    match name {
        "invariance" => Ok(invariance_check(n.unwrap_or(5), 500, 10, opts.seed)),
        "lemma1" => lemma1_check(n.unwrap_or(100), opts.seed),
        "lemma4" => Ok(lemma4_check(n.unwrap_or(1000), opts.seed)),
        "lemma5" => lemma5_check(n.unwrap_or(200), 2000, 5, opts.seed),
        "corollary" => corollary_check(n.unwrap_or(50), 400, opts.seed, opts.comparator_iterations),
        "theorem1" => theorem1_check(n.unwrap_or(10), opts.seed, opts.comparator_iterations),
        "theorem2" => theorem2_check(n.unwrap_or(10), opts.seed, opts.comparator_iterations),
        "p2" => p2_check(n.unwrap_or(20), opts.seed),
        "projection" => Ok(projection_check(n.unwrap_or(100), opts.seed)),
        other => Err(TheoryError::ConfigMismatch(format!("unknown check `{other}`"))),
    }
}

fn classification_view(examples: &[Example]) -> Vec<Example> {
    examples
        .iter()
        .map(|e| Example::new(e.features.clone(), if e.label >= 0.0 { 1.0 } else { -1.0 }))
        .collect()
}

fn small_dataset(rng: &mut ChaCha8Rng, t: usize, d: usize, seed: u64) -> Vec<Example> {
    let kind = match rng.random_range(0..3u8) {
        0 => SyntheticKind::RangeBand,
        1 => SyntheticKind::ExponentialMagnitudes,
        _ => SyntheticKind::ScaledTwoFeature,
    };
    let mut spec = SyntheticSpec::new(kind, t, d, seed);
    spec.noise = 0.2;
    spec.scale_factor = match kind {
        SyntheticKind::ScaledTwoFeature => 10f64.powf(rng.random_range(-2.0..2.0)),
        _ => 10f64.powf(rng.random_range(0.0..2.0)),
    };
    spec.generate()
}

fn pick_loss(rng: &mut ChaCha8Rng) -> Loss {
    match rng.random_range(0..3u8) {
        0 => Loss::Squared,
        1 => Loss::Logistic,
        _ => Loss::Hinge,
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Scale invariance of NG / NAG / sNAG: rerunning on per-feature rescaled
/// data must reproduce the prediction sequence and the rescaled weights.
pub fn invariance_check(n_datasets: usize, t: usize, d: usize, seed: u64) -> SuiteCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut passed = true;
    let tol = 1e-6;

    for k in 0..n_datasets {
        let loss = pick_loss(&mut rng);
        let mut spec = SyntheticSpec::new(
            SyntheticKind::RangeBand,
            t,
            d,
            seed.wrapping_add(1000 + k as u64),
        );
        spec.noise = 0.3;
        spec.scale_factor = 10f64.powf(rng.random_range(0.0..2.0));
        let mut data = spec.generate();
        if loss.is_classification() {
            data = classification_view(&data);
        }
        let scales: BTreeMap<u32, f64> =
            (0..d as u32).map(|i| (i, 10f64.powf(rng.random_range(-3.0..3.0)))).collect();
        let scaled: Vec<Example> = data
            .iter()
            .map(|e| Example::new(e.features.map_values(|id, v| v * scales[&id]), e.label))
            .collect();

        for algo in [Algorithm::Ng, Algorithm::Nag, Algorithm::Snag] {
            let config = LearnerConfig::new(algo, 0.5, loss);
            let mut s1 = learner::LearnerState::new();
            let mut s2 = learner::LearnerState::new();
            let mut worst_pred = 0.0f64;
            for (a, b) in data.iter().zip(&scaled) {
                let o1 = learner::update(&mut s1, &config, a).expect("update");
                let o2 = learner::update(&mut s2, &config, b).expect("update");
                worst_pred = worst_pred.max(rel_gap(o1.prediction.raw, o2.prediction.raw));
            }
            let mut worst_w = 0.0f64;
            for (id, slot) in s1.iter_slots() {
                let expect = slot.weight / scales[&id];
                let got = s2.weight(id);
                worst_w = worst_w.max(rel_gap(expect, got));
            }
            let ok = worst_pred <= tol && worst_w <= tol;
            passed &= ok;
            lines.push(format!(
                "dataset={k} algo={algo} loss={loss} worst_pred_gap={worst_pred:.3e} worst_weight_gap={worst_w:.3e} holds={ok} tolerance={tol:.0e}"
            ));
        }
    }
    SuiteCheck { name: "invariance", seed, passed, lines }
}

/// Regret decomposition on randomized diagonal-conditioner traces.
pub fn lemma1_check(n_traces: usize, seed: u64) -> Result<SuiteCheck, TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut passed = true;
    let mut min_slack = f64::INFINITY;

    for k in 0..n_traces {
        let t = rng.random_range(5..40);
        let d = rng.random_range(1..=4);
        let loss = pick_loss(&mut rng);
        let mut data = small_dataset(&mut rng, t, d, seed.wrapping_add(5000 + k as u64));
        if loss.is_classification() {
            data = classification_view(&data);
        }
        let kind = if rng.random_bool(0.5) {
            ConditionerKind::Transductive
        } else {
            ConditionerKind::Streaming
        };
        let q = if rng.random_bool(0.5) { QNorm::One } else { QNorm::Two };
        let project = rng.random_bool(0.5);
        let c = rng.random_range(0.5..3.0);
        let run = run_conditioned(
            &data,
            CondRunConfig { loss, c, eta: SQRT_2, q, kind, project, clip: false },
        )?;

        // random comparator point; must lie in the ball when projecting
        let ids = run.trace.feature_ids();
        let raw = SparseVec::from_pairs(
            ids.iter().map(|&id| (id, rng.random_range(-2.0..2.0))),
        )
        .expect("unique ids");
        let w_star = if project {
            let s_full = empirical_s(&data, PNorm::Inf)?;
            let unit: BTreeMap<u32, f64> = ids.iter().map(|&id| (id, 1.0)).collect();
            projection::project(&raw, &unit, &ProjectionConfig { c, q, s_diag: s_full })?
        } else {
            raw
        };

        let rep = check_lemma1(&run.trace, &w_star, loss)?;
        let slack = rep.linearized.rhs - rep.linearized.lhs;
        min_slack = min_slack.min(slack);
        let ok = rep.linearized.holds && rep.loss_regret.holds;
        passed &= ok;
        if !ok {
            lines.push(format!(
                "trace={k} lhs={:.6e} rhs={:.6e} holds=false",
                rep.linearized.lhs, rep.linearized.rhs
            ));
        }
    }
    lines.push(format!(
        "traces={n_traces} min_slack={min_slack:.6e} holds={passed} tolerance=1e-9"
    ));
    Ok(SuiteCheck { name: "lemma1", seed, passed, lines })
}

/// The adaptive gradient inequality on random vectors.
pub fn lemma4_check(n_vectors: usize, seed: u64) -> SuiteCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passed = true;
    let mut worst_ratio = 0.0f64;
    for _ in 0..n_vectors {
        let len = rng.random_range(1..=100);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let x: Vec<f64> = (0..len)
            .map(|_| {
                if rng.random_bool(0.15) {
                    0.0
                } else {
                    scale * rng.random_range(-1.0..1.0)
                }
            })
            .collect();
        let rep = check_lemma_adaptive_grad(&x);
        passed &= rep.holds;
        if rep.rhs > 0.0 {
            worst_ratio = worst_ratio.max(rep.lhs / rep.rhs);
        }
    }
    let flat = check_lemma_adaptive_grad(&vec![1.0; 2000]);
    passed &= flat.holds;
    let lines = vec![
        format!("vectors={n_vectors} worst_lhs_over_rhs={worst_ratio:.6} holds={passed} tolerance=1e-12"),
        format!(
            "note=flat-vector tightness lhs/rhs={:.6} (approaches 1 from below)",
            flat.lhs / flat.rhs
        ),
    ];
    SuiteCheck { name: "lemma4", seed, passed, lines }
}

/// Percentile lemma Monte-Carlo at three (nu, delta) settings.
pub fn lemma5_check(
    permutations: usize,
    t: usize,
    d: usize,
    seed: u64,
) -> Result<SuiteCheck, TheoryError> {
    let mut spec = SyntheticSpec::new(SyntheticKind::ExponentialMagnitudes, t, d, seed);
    spec.noise = 0.1;
    spec.scale_factor = 10.0;
    let data = spec.generate();
    let mut lines = Vec::new();
    let mut passed = true;
    for (nu, delta) in [(0.1, 0.05), (0.2, 0.1), (0.05, 0.01)] {
        let rep = check_lemma5(&data, nu, delta, permutations, seed.wrapping_add(77))?;
        passed &= rep.holds;
        lines.push(format!(
            "nu={nu} delta={delta} tau={} fraction={:.4} threshold={:.4} holds={}",
            rep.tau, rep.fraction, rep.threshold, rep.holds
        ));
    }
    Ok(SuiteCheck { name: "lemma5", seed, passed, lines })
}

/// Full permutation corollary: hard regret bound on every permutation
/// plus the soft quantile claims.
pub fn corollary_check(
    permutations: usize,
    t: usize,
    seed: u64,
    comparator_iterations: usize,
) -> Result<SuiteCheck, TheoryError> {
    let mut spec = SyntheticSpec::new(SyntheticKind::ExponentialMagnitudes, t, 4, seed);
    spec.noise = 0.3;
    spec.scale_factor = 10.0;
    let data = classification_view(&spec.generate());
    let cfg = CorollaryConfig {
        loss: Loss::Hinge,
        c: 1.0,
        nu: 0.1,
        delta: 0.05,
        permutations,
        seed: seed.wrapping_add(400),
        r_max: None,
        comparator_iterations,
    };
    let rep = check_corollary_permute(&data, &cfg)?;
    let passed = rep.bound_holds_all && rep.lemma5.holds;
    // for exponential magnitudes the scale surprise should stay around
    // log(T/delta) / log(1/nu); reported, not asserted
    let footnote = ((t as f64) / cfg.delta).ln() / (1.0 / cfg.nu).ln();
    let lines = vec![
        format!(
            "permutations={permutations} tau={} r_max={} bound_holds_all={} worst_slack={:.6e}",
            rep.lemma5.tau, rep.r_max, rep.bound_holds_all, rep.worst_slack
        ),
        format!(
            "lemma5 fraction={:.4} threshold={:.4} holds={}",
            rep.lemma5.fraction, rep.lemma5.threshold, rep.lemma5.holds
        ),
        format!(
            "note=delta<=max/quantile claim fraction={:.4} (soft, expect >= {:.4})",
            rep.delta_claim_fraction,
            1.0 - cfg.delta
        ),
        format!(
            "note=exponential-magnitude scale surprise expected around log(T/delta)/log(1/nu)={footnote:.2}"
        ),
    ];
    Ok(SuiteCheck { name: "corollary", seed, passed, lines })
}

fn rescaled(data: &[Example], scales: &BTreeMap<u32, f64>) -> Vec<Example> {
    data.iter()
        .map(|e| Example::new(e.features.map_values(|id, v| v * scales[&id]), e.label))
        .collect()
}

/// Transductive conditioner + projection: regret below the bound, and the
/// bound itself invariant under feature rescaling.
pub fn theorem1_check(
    n_instances: usize,
    seed: u64,
    comparator_iterations: usize,
) -> Result<SuiteCheck, TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut passed = true;
    for k in 0..n_instances {
        let d = rng.random_range(1..=5);
        let loss = if rng.random_bool(0.7) { Loss::Squared } else { Loss::Hinge };
        let mut data = small_dataset(&mut rng, 200, d, seed.wrapping_add(9000 + k as u64));
        if loss.is_classification() {
            data = classification_view(&data);
        }
        let q = if rng.random_bool(0.5) { QNorm::One } else { QNorm::Two };
        let c = rng.random_range(0.5..2.0);
        let run = run_conditioned(
            &data,
            CondRunConfig {
                loss,
                c,
                eta: SQRT_2,
                q,
                kind: ConditionerKind::Transductive,
                project: true,
                clip: false,
            },
        )?;
        let p = match q {
            QNorm::One => PNorm::Inf,
            QNorm::Two => PNorm::Two,
        };
        let ball = AdversaryBall { s_diag: run.s_diag.clone(), p, c };
        let comp = comparator_loss_with_iterations(&data, loss, &ball, comparator_iterations)?;
        let rep = check_theorem_trans(&run, &comp)?;
        passed &= rep.holds;

        // bound invariance under per-feature rescaling
        let scales: BTreeMap<u32, f64> = run
            .s_diag
            .keys()
            .map(|&id| (id, 10f64.powf(rng.random_range(-2.0..2.0))))
            .collect();
        let run2 = run_conditioned(&rescaled(&data, &scales), run.config)?;
        let bound2 =
            theorem_trans_bound(&run2.s_diag, &run2.trace.grad_sq_sums(), run2.config.c)?;
        let gap = rel_gap(rep.bound, bound2);
        let invariant = gap <= 1e-9;
        passed &= invariant;
        lines.push(format!(
            "instance={k} d={d} loss={loss} q={} regret={:.6e} bound={:.6e} holds={} bound_rescaled_gap={gap:.3e} invariant={invariant}",
            q.as_u32(), rep.regret, rep.bound, rep.holds
        ));
    }
    Ok(SuiteCheck { name: "theorem1", seed, passed, lines })
}

/// Streaming conditioner + prefix-ball projection on banded data where
/// every feature's scale surprise is at most 2.
pub fn theorem2_check(
    n_instances: usize,
    seed: u64,
    comparator_iterations: usize,
) -> Result<SuiteCheck, TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut passed = true;
    for k in 0..n_instances {
        let d = rng.random_range(1..=5);
        let loss = if rng.random_bool(0.7) { Loss::Squared } else { Loss::Hinge };
        let mut spec = SyntheticSpec::new(
            SyntheticKind::RangeBand,
            200,
            d,
            seed.wrapping_add(11_000 + k as u64),
        );
        spec.noise = 0.2;
        spec.scale_factor = 10f64.powf(rng.random_range(0.0..2.0));
        let mut data = spec.generate();
        if loss.is_classification() {
            data = classification_view(&data);
        }
        let c = rng.random_range(0.5..2.0);
        let run = run_conditioned(
            &data,
            CondRunConfig {
                loss,
                c,
                eta: SQRT_2,
                q: QNorm::One,
                kind: ConditionerKind::Streaming,
                project: true,
                clip: false,
            },
        )?;
        let ball = AdversaryBall { s_diag: run.s_diag.clone(), p: PNorm::Inf, c };
        let comp = comparator_loss_with_iterations(&data, loss, &ball, comparator_iterations)?;
        let rep = check_theorem_stream(&run, &comp)?;
        let max_delta = rep.delta.values().copied().fold(0.0f64, f64::max);
        let delta_ok = max_delta <= 2.0 + 1e-9;
        passed &= rep.report.holds && delta_ok;
        lines.push(format!(
            "instance={k} d={d} loss={loss} regret={:.6e} bound={:.6e} max_delta={max_delta:.4} holds={}",
            rep.report.regret, rep.report.bound, rep.report.holds && delta_ok
        ));
    }
    Ok(SuiteCheck { name: "theorem2", seed, passed, lines })
}

/// The p = 2 chain on feasible random traces.
pub fn p2_check(n_traces: usize, seed: u64) -> Result<SuiteCheck, TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut passed = true;
    for k in 0..n_traces {
        let d = rng.random_range(1..=10);
        let t = rng.random_range(10..=100);
        let loss = pick_loss(&mut rng);
        let mut data = small_dataset(&mut rng, t, d, seed.wrapping_add(13_000 + k as u64));
        if loss.is_classification() {
            data = classification_view(&data);
        }
        let config = LearnerConfig::new(Algorithm::Nag, 0.5, loss);
        let res = learner::run_on(
            &config,
            &data,
            learner::RunOptions { trace: true, metric: None },
        )
        .map_err(|e| TheoryError::ConfigMismatch(format!("learner run failed: {e}")))?;
        let trace = res.trace.expect("tracing enabled");
        // feasible S for p=2 by construction: S_ii = 1 / (d' max^2)
        let maxabs = trace.max_abs();
        let d_actual = maxabs.len() as f64;
        let s_diag: BTreeMap<u32, f64> =
            maxabs.iter().map(|(&id, &m)| (id, 1.0 / (d_actual * m * m))).collect();
        let ball = AdversaryBall { s_diag, p: PNorm::Two, c: 1.0 };
        let rep = check_p2_bound(&trace, &ball)?;
        passed &= rep.holds;
        if !rep.holds {
            lines.push(format!(
                "trace={k} concavity_lhs={:.6e} concavity_rhs={:.6e} ball_lhs={:.6e} ball_rhs={:.6e} holds=false",
                rep.step_concavity.lhs, rep.step_concavity.rhs, rep.step_ball.lhs, rep.step_ball.rhs
            ));
        }
    }
    lines.push(format!("traces={n_traces} holds={passed} tolerance=1e-9"));
    Ok(SuiteCheck { name: "p2", seed, passed, lines })
}

pub const ORACLE_ITERATIONS: usize = 1_000_000;

/// Analytic projection against the iterative oracle, plus feasibility,
/// idempotence and non-expansiveness.
pub fn projection_check(n_instances: usize, seed: u64) -> SuiteCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passed = true;
    let mut worst_coord_gap = 0.0f64;
    let mut lines = Vec::new();
    for k in 0..n_instances {
        let d = rng.random_range(1..=4usize);
        let ids: Vec<u32> = (0..d as u32).collect();
        let w = SparseVec::from_pairs(ids.iter().map(|&id| (id, rng.random_range(-3.0..3.0))))
            .expect("unique ids");
        let a: BTreeMap<u32, f64> =
            ids.iter().map(|&id| (id, rng.random_range(0.1..10.0))).collect();
        let s: BTreeMap<u32, f64> =
            ids.iter().map(|&id| (id, rng.random_range(0.1..10.0))).collect();
        let cfg = ProjectionConfig {
            c: rng.random_range(0.1..5.0),
            q: if rng.random_bool(0.5) { QNorm::One } else { QNorm::Two },
            s_diag: s,
        };
        let exact = match projection::project(&w, &a, &cfg) {
            Ok(p) => p,
            Err(e) => {
                lines.push(format!("instance={k} error={e}"));
                passed = false;
                continue;
            }
        };
        let reference = match oracle::pgd_project(&w, &a, &cfg, ORACLE_ITERATIONS) {
            Ok(p) => p,
            Err(e) => {
                lines.push(format!("instance={k} oracle_error={e}"));
                passed = false;
                continue;
            }
        };
        let mut gap = 0.0f64;
        for &id in &ids {
            gap = gap.max((exact.get(id) - reference.get(id)).abs());
        }
        worst_coord_gap = worst_coord_gap.max(gap);
        let feasible = scaled_norm(&exact, &cfg.s_diag, cfg.q) <= cfg.c * (1.0 + 1e-10);
        let again = projection::project(&exact, &a, &cfg).expect("valid inputs");
        let idem = ids
            .iter()
            .all(|&id| (again.get(id) - exact.get(id)).abs() <= 1e-10);
        // non-expansiveness against a feasible point
        let z_raw = SparseVec::from_pairs(
            ids.iter().map(|&id| (id, rng.random_range(-1.0..1.0))),
        )
        .expect("unique ids");
        let unit: BTreeMap<u32, f64> = ids.iter().map(|&id| (id, 1.0)).collect();
        let z = projection::project(&z_raw, &unit, &cfg).expect("valid inputs");
        let nonexp = projection::metric_dist_sq(&exact, &z, &a)
            <= projection::metric_dist_sq(&w, &z, &a) + 1e-10;
        let ok = gap <= 1e-5 && feasible && idem && nonexp;
        passed &= ok;
        if !ok {
            lines.push(format!(
                "instance={k} coord_gap={gap:.3e} feasible={feasible} idempotent={idem} nonexpansive={nonexp}"
            ));
        }
    }
    lines.push(format!(
        "instances={n_instances} worst_coord_gap={worst_coord_gap:.3e} holds={passed} tolerance=1e-5"
    ));
    SuiteCheck { name: "projection", seed, passed, lines }
}
