//! Versioned flat-file model persistence. Floats are written with 17
//! significant digits so a reloaded model reproduces predictions exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::learner::{Algorithm, EtaSchedule, LearnerConfig, LearnerState, ProjectionSettings, Slot};
use crate::loss::Loss;
use crate::projection::QNorm;
use crate::theory::trace::fmt_f64;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("model i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model parse error at line {line}: {what}")]
    Parse { line: usize, what: String },
}

fn perr(line: usize, what: impl Into<String>) -> ModelIoError {
    ModelIoError::Parse { line, what: what.into() }
}

pub fn save_model<W: Write>(
    mut w: W,
    state: &LearnerState,
    config: &LearnerConfig,
) -> Result<(), ModelIoError> {
    writeln!(w, "normlearn-model v1")?;
    writeln!(w, "algorithm {}", config.algorithm)?;
    writeln!(w, "eta {}", fmt_f64(config.eta))?;
    writeln!(w, "schedule {}", config.schedule.name())?;
    writeln!(w, "loss {}", config.loss)?;
    match config.clip_bound {
        Some(c) => writeln!(w, "clip {}", fmt_f64(c))?,
        None => writeln!(w, "clip none")?,
    }
    match &config.projection {
        Some(p) => writeln!(w, "projection {} {}", fmt_f64(p.c), p.q.as_u32())?,
        None => writeln!(w, "projection none")?,
    }
    writeln!(w, "t {}", state.round)?;
    writeln!(w, "n {}", fmt_f64(state.norm_sum))?;
    writeln!(w, "features {}", state.n_features())?;
    let snag = config.algorithm == Algorithm::Snag;
    for (id, slot) in state.iter_slots() {
        if snag {
            writeln!(
                w,
                "{} {} {} {} {}",
                id,
                fmt_f64(slot.weight),
                fmt_f64(slot.scale),
                fmt_f64(slot.grad_sq),
                fmt_f64(slot.norm_ref)
            )?;
        } else {
            writeln!(
                w,
                "{} {} {} {}",
                id,
                fmt_f64(slot.weight),
                fmt_f64(slot.scale),
                fmt_f64(slot.grad_sq)
            )?;
        }
    }
    Ok(())
}

pub fn save_model_file(
    path: &Path,
    state: &LearnerState,
    config: &LearnerConfig,
) -> Result<(), ModelIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    save_model(&mut w, state, config)?;
    w.flush()?;
    Ok(())
}

type NumberedLines<R> = std::iter::Enumerate<std::io::Lines<R>>;

fn next<R: BufRead>(
    lines: &mut NumberedLines<R>,
    expect: &'static str,
) -> Result<(usize, String), ModelIoError> {
    match lines.next() {
        Some((n, Ok(l))) => Ok((n + 1, l)),
        Some((_, Err(e))) => Err(ModelIoError::Io(e)),
        None => Err(perr(0, format!("unexpected end of file, expected {expect}"))),
    }
}

fn field<R: BufRead>(
    lines: &mut NumberedLines<R>,
    key: &'static str,
) -> Result<(usize, String), ModelIoError> {
    let (n, line) = next(lines, key)?;
    match line.strip_prefix(key).and_then(|rest| rest.strip_prefix(' ')) {
        Some(rest) => Ok((n, rest.trim().to_string())),
        None => Err(perr(n, format!("expected `{key} ...`, found `{line}`"))),
    }
}

pub fn load_model<R: BufRead>(r: R) -> Result<(LearnerState, LearnerConfig), ModelIoError> {
    let lines = &mut r.lines().enumerate();

    let (n, header) = next(lines, "header")?;
    if header.trim() != "normlearn-model v1" {
        return Err(perr(n, "expected header `normlearn-model v1`"));
    }
    let (n, algo) = field(lines, "algorithm")?;
    let algorithm: Algorithm = algo.parse().map_err(|e| perr(n, format!("{e}")))?;
    let (n, eta_s) = field(lines, "eta")?;
    let eta: f64 = eta_s.parse().map_err(|_| perr(n, "bad eta"))?;
    let (n, sched_s) = field(lines, "schedule")?;
    let schedule: EtaSchedule = sched_s.parse().map_err(|e| perr(n, e))?;
    let (n, loss_s) = field(lines, "loss")?;
    let loss: Loss = loss_s.parse().map_err(|e| perr(n, format!("{e}")))?;
    let (n, clip_s) = field(lines, "clip")?;
    let clip_bound = if clip_s == "none" {
        None
    } else {
        Some(clip_s.parse::<f64>().map_err(|_| perr(n, "bad clip bound"))?)
    };
    let (n, proj_s) = field(lines, "projection")?;
    let projection = if proj_s == "none" {
        None
    } else {
        let mut parts = proj_s.split_whitespace();
        let c: f64 = parts
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| perr(n, "bad projection bound"))?;
        let q: QNorm = parts
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| perr(n, "bad projection norm"))?;
        Some(ProjectionSettings { c, q })
    };
    let (n, t_s) = field(lines, "t")?;
    let round: u64 = t_s.parse().map_err(|_| perr(n, "bad round count"))?;
    let (n, n_s) = field(lines, "n")?;
    let norm_sum: f64 = n_s.parse().map_err(|_| perr(n, "bad norm sum"))?;
    let (n, count_s) = field(lines, "features")?;
    let count: usize = count_s.parse().map_err(|_| perr(n, "bad feature count"))?;

    let mut state = LearnerState::new();
    state.round = round;
    state.norm_sum = norm_sum;
    let snag = algorithm == Algorithm::Snag;
    let want = if snag { 5 } else { 4 };
    let mut last_id: Option<u32> = None;
    for _ in 0..count {
        let (n, line) = next(lines, "feature record")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != want {
            return Err(perr(n, format!("expected {want} fields, found {}", parts.len())));
        }
        let id: u32 = parts[0].parse().map_err(|_| perr(n, "bad feature id"))?;
        if last_id.is_some_and(|prev| prev >= id) {
            return Err(perr(n, "feature ids must be strictly increasing"));
        }
        last_id = Some(id);
        let mut nums = [0.0f64; 4];
        for (slot, raw) in nums.iter_mut().zip(&parts[1..]) {
            *slot = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| perr(n, format!("bad numeric field `{raw}`")))?;
        }
        state.insert_slot(
            id,
            Slot {
                weight: nums[0],
                scale: nums[1],
                grad_sq: nums[2],
                norm_ref: if snag { nums[3] } else { 0.0 },
            },
        );
    }

    let config = LearnerConfig { algorithm, eta, schedule, loss, clip_bound, projection };
    Ok((state, config))
}

pub fn load_model_file(path: &Path) -> Result<(LearnerState, LearnerConfig), ModelIoError> {
    load_model(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{predict, run_on, RunOptions};
    use crate::sparse::{Example, SparseVec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_reproduces_predictions_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let examples: Vec<Example> = (0..50)
            .map(|_| {
                let pairs: Vec<(u32, f64)> = (0..4)
                    .map(|i| (i, rng.random_range(-5.0..5.0)))
                    .filter(|&(_, v)| v != 0.0)
                    .collect();
                Example::new(
                    SparseVec::from_pairs(pairs).unwrap(),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        for algorithm in [
            Algorithm::Sgd,
            Algorithm::Adagrad,
            Algorithm::Ng,
            Algorithm::Nag,
            Algorithm::Snag,
        ] {
            let config = LearnerConfig::new(algorithm, 0.3, Loss::Squared);
            let res = run_on(&config, &examples, RunOptions::default()).unwrap();
            let mut buf = Vec::new();
            save_model(&mut buf, &res.state, &config).unwrap();
            let (loaded, loaded_cfg) = load_model(buf.as_slice()).unwrap();
            assert_eq!(loaded_cfg.algorithm, algorithm);
            assert_eq!(loaded, res.state, "{algorithm}: state must round trip exactly");
            for e in &examples {
                let a = predict(&res.state, &config, e).raw;
                let b = predict(&loaded, &loaded_cfg, e).raw;
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn rejects_corrupted_models() {
        let config = LearnerConfig::new(Algorithm::Nag, 0.5, Loss::Squared);
        let res = run_on(
            &config,
            &[Example::new(SparseVec::from_pairs([(0, 1.0)]).unwrap(), 1.0)],
            RunOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        save_model(&mut buf, &res.state, &config).unwrap();
        let text = String::from_utf8(buf).unwrap();

        assert!(load_model("garbage".as_bytes()).is_err());
        // drop the final feature record line entirely
        let body = text.trim_end();
        let truncated = &body[..body.rfind('\n').unwrap() + 1];
        assert!(load_model(truncated.as_bytes()).is_err());
        let wrong_header = text.replace("v1", "v9");
        assert!(load_model(wrong_header.as_bytes()).is_err());
        let bad_field = text.replace("eta", "ETA");
        assert!(load_model(bad_field.as_bytes()).is_err());
    }

    #[test]
    fn preserves_config_options() {
        let mut config = LearnerConfig::new(Algorithm::Ng, 0.25, Loss::Hinge);
        config.clip_bound = Some(2.0);
        config.projection = Some(ProjectionSettings { c: 1.5, q: QNorm::One });
        let res = run_on(
            &config,
            &[Example::new(SparseVec::from_pairs([(3, 2.0)]).unwrap(), 1.0)],
            RunOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        save_model(&mut buf, &res.state, &config).unwrap();
        let (_, loaded) = load_model(buf.as_slice()).unwrap();
        assert_eq!(loaded.clip_bound, Some(2.0));
        assert_eq!(loaded.projection, config.projection);
        assert_eq!(loaded.loss, Loss::Hinge);
    }
}
