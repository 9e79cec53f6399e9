//! `train`: one learner over one stream, scored progressively
//! (evaluate-then-learn), with optional model/trace/prediction outputs
//! and a test-only mode for saved models.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;

use crate::cli::{Outcome, SourceArgs};
use crate::learner::{
    predict, resume_stream, Algorithm, EtaSchedule, LearnerConfig, LearnerState,
    ProjectionSettings, RunOptions,
};
use crate::loss::Loss;
use crate::model_io::{load_model_file, save_model_file};
use crate::projection::QNorm;
use crate::theory::trace::fmt_f64;

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// sgd, adagrad, ng, nag or snag
    #[arg(long, default_value = "nag")]
    pub algo: String,

    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,

    /// Learning rate schedule: constant or inv-sqrt
    #[arg(long, default_value = "constant")]
    pub eta_schedule: String,

    /// squared, logistic or hinge
    #[arg(long, default_value = "squared")]
    pub loss: String,

    /// Truncate predictions to [-C, C]
    #[arg(long, value_name = "C")]
    pub clip: Option<f64>,

    /// Project weights onto the prefix ball with this output bound
    #[arg(long, value_name = "C")]
    pub project_c: Option<f64>,

    /// Projection norm exponent (1 or 2)
    #[arg(long, default_value = "1")]
    pub project_q: String,

    /// Also report progressive zero-one loss
    #[arg(long)]
    pub metric_zero_one: bool,

    /// Save the final model here
    #[arg(long, value_name = "PATH")]
    pub save: Option<PathBuf>,

    /// Start from a saved model (its configuration wins)
    #[arg(long, value_name = "PATH")]
    pub load: Option<PathBuf>,

    /// Score the loaded model without updating it (requires --load)
    #[arg(long)]
    pub test_only: bool,

    /// Write the per-round trace here
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,

    /// Write one prediction per line here
    #[arg(long, value_name = "PATH")]
    pub predictions: Option<PathBuf>,
}

impl TrainArgs {
    fn config(&self) -> Result<LearnerConfig> {
        let algorithm: Algorithm = self.algo.parse()?;
        let loss: Loss = self.loss.parse()?;
        let mut config = LearnerConfig::new(algorithm, self.eta, loss);
        config.schedule =
            self.eta_schedule.parse().map_err(|e: String| anyhow::anyhow!(e))?;
        config.clip_bound = self.clip;
        if let Some(c) = self.project_c {
            let q: QNorm = self.project_q.parse().map_err(|e: String| anyhow::anyhow!(e))?;
            config.projection = Some(ProjectionSettings { c, q });
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn run(args: TrainArgs) -> Result<Outcome> {
    let start = Instant::now();
    let (state, config) = match &args.load {
        Some(path) => {
            let (state, config) =
                load_model_file(path).with_context(|| format!("loading {}", path.display()))?;
            (state, config)
        }
        None => {
            if args.test_only {
                bail!("--test-only requires --load");
            }
            (LearnerState::new(), args.config()?)
        }
    };

    let mut out = std::io::stdout().lock();
    writeln!(out, "source {}", args.source.describe())?;
    writeln!(out, "algorithm {}", config.algorithm)?;
    writeln!(out, "eta {:.6e}", config.eta)?;
    if config.schedule != EtaSchedule::Constant {
        writeln!(out, "eta_schedule {}", config.schedule.name())?;
    }
    writeln!(out, "loss {}", config.loss)?;

    let mut predictions_sink = match &args.predictions {
        Some(path) => Some(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => None,
    };

    if args.test_only {
        let mut total = 0.0;
        let mut metric_total = 0.0;
        let mut seen = 0u64;
        for item in args.source.stream()? {
            let example = item?;
            if example.features.is_empty() {
                continue;
            }
            let p = predict(&state, &config, &example);
            total += config.loss.value(p.clipped, example.label);
            if args.metric_zero_one {
                metric_total += Loss::ZeroOne.value(p.clipped, example.label);
            }
            if let Some(sink) = predictions_sink.as_mut() {
                writeln!(sink, "{}", fmt_f64(p.clipped))?;
            }
            seen += 1;
        }
        if seen == 0 {
            bail!("input stream contained no usable examples");
        }
        writeln!(out, "mode test-only")?;
        writeln!(out, "examples {}", seen)?;
        writeln!(out, "average_loss {}", fmt_f64(total / seen as f64))?;
        if args.metric_zero_one {
            writeln!(out, "zero_one_loss {}", fmt_f64(metric_total / seen as f64))?;
        }
        writeln!(out, "wall_time_s {:.3}", start.elapsed().as_secs_f64())?;
        if let Some(mut sink) = predictions_sink {
            sink.flush()?;
        }
        return Ok(Outcome::Success);
    }

    let opts = RunOptions {
        trace: args.trace.is_some() || args.predictions.is_some(),
        metric: args.metric_zero_one.then_some(Loss::ZeroOne),
    };
    let result = resume_stream(state, &config, args.source.stream()?, opts)?;

    writeln!(out, "examples {}", result.examples_seen)?;
    if result.skipped_empty > 0 {
        writeln!(out, "skipped_empty {}", result.skipped_empty)?;
    }
    writeln!(out, "progressive_loss {}", fmt_f64(result.progressive_loss))?;
    if config.loss == Loss::Squared {
        if let Some(norm) = result.normalized_loss() {
            writeln!(out, "normalized_loss {}", fmt_f64(norm))?;
        }
    }
    if let Some(metric) = result.metric_loss {
        writeln!(out, "zero_one_loss {}", fmt_f64(metric))?;
    }
    writeln!(out, "features {}", result.state.n_features())?;
    writeln!(out, "wall_time_s {:.3}", start.elapsed().as_secs_f64())?;

    if let Some(sink) = predictions_sink.as_mut() {
        let trace = result.trace.as_ref().expect("tracing enabled alongside predictions");
        for round in &trace.rounds {
            writeln!(sink, "{}", fmt_f64(round.yhat))?;
        }
    }
    if let Some(mut sink) = predictions_sink {
        sink.flush()?;
    }

    if let Some(path) = &args.trace {
        let trace = result.trace.as_ref().expect("tracing was enabled");
        let mut w = BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        );
        trace.write_to(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.save {
        save_model_file(path, &result.state, &config)
            .with_context(|| format!("saving {}", path.display()))?;
        writeln!(out, "model_saved {}", path.display())?;
    }
    Ok(Outcome::Success)
}
