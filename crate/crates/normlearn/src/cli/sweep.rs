//! `sweep` and `scale-experiment`: geometric learning-rate grids run as
//! independent cells (parallel across a worker pool), emitted as CSV
//! with the best row per algorithm starred.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;

use crate::cli::significance::kl_chernoff_interval;
use crate::cli::{open_sink, Outcome, SourceArgs};
use crate::learner::{run_on, Algorithm, LearnerConfig, RunOptions};
use crate::loss::Loss;
use crate::sparse::Example;
use crate::data::{SyntheticKind, SyntheticSpec};

/// Geometric grid: min * 10^(k/points_per_decade), with max itself
/// appended when the last step lands short of it.
pub fn eta_grid(min: f64, max: f64, points_per_decade: usize) -> Vec<f64> {
    assert!(min > 0.0 && max >= min && points_per_decade > 0);
    let mut etas = Vec::new();
    let mut k = 0usize;
    loop {
        let eta = min * 10f64.powf(k as f64 / points_per_decade as f64);
        if eta > max * (1.0 + 1e-9) {
            break;
        }
        etas.push(eta);
        k += 1;
    }
    if *etas.last().expect("non-empty grid") < max * (1.0 - 1e-9) {
        etas.push(max);
    }
    etas
}

fn parse_algos(raw: &str) -> Result<Vec<Algorithm>> {
    raw.split(',')
        .map(|s| s.trim().parse::<Algorithm>().map_err(anyhow::Error::from))
        .collect()
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    builder.build().context("building worker pool")
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Comma-separated list of algorithms
    #[arg(long, default_value = "nag,adagrad")]
    pub algos: String,

    #[arg(long, default_value = "squared")]
    pub loss: String,

    #[arg(long, default_value_t = 1e-7)]
    pub eta_min: f64,

    #[arg(long, default_value_t = 20.0)]
    pub eta_max: f64,

    #[arg(long, default_value_t = 5)]
    pub points_per_decade: usize,

    /// Truncate predictions to [-C, C]
    #[arg(long, value_name = "C")]
    pub clip: Option<f64>,

    /// Rank cells by progressive zero-one loss instead of training loss
    #[arg(long)]
    pub metric_zero_one: bool,

    /// Average each cell over this many reruns of the synthetic source
    /// (seeds seed, seed+1, ...)
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,

    /// Worker thread limit
    #[arg(long)]
    pub workers: Option<usize>,

    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct CellResult {
    progressive: f64,
    metric: Option<f64>,
    examples: u64,
}

fn run_cell(
    algo: Algorithm,
    eta: f64,
    loss: Loss,
    clip: Option<f64>,
    metric: bool,
    datasets: &[Vec<Example>],
) -> Result<CellResult> {
    let mut total = 0.0;
    let mut metric_total = 0.0;
    let mut examples = 0u64;
    for data in datasets {
        let mut config = LearnerConfig::new(algo, eta, loss);
        config.clip_bound = clip;
        let res = run_on(
            &config,
            data,
            RunOptions { trace: false, metric: metric.then_some(Loss::ZeroOne) },
        )?;
        total += res.progressive_loss;
        metric_total += res.metric_loss.unwrap_or(0.0);
        examples += res.examples_seen;
    }
    let n = datasets.len() as f64;
    Ok(CellResult {
        progressive: total / n,
        metric: metric.then_some(metric_total / n),
        examples,
    })
}

/// One dataset per repeat: synthetic sources advance the seed, file
/// sources are read once and shared.
fn repeat_datasets(source: &SourceArgs, repeats: usize) -> Result<Vec<Vec<Example>>> {
    if source.synthetic.is_some() && repeats > 1 {
        (0..repeats)
            .map(|r| {
                let mut src = source.clone();
                src.seed = source.seed.wrapping_add(r as u64);
                src.load_all()
            })
            .collect()
    } else {
        Ok(vec![source.load_all()?])
    }
}

pub fn run_sweep(args: SweepArgs) -> Result<Outcome> {
    let algos = parse_algos(&args.algos)?;
    let loss: Loss = args.loss.parse()?;
    let etas = eta_grid(args.eta_min, args.eta_max, args.points_per_decade);
    if algos.is_empty() || etas.is_empty() {
        bail!("sweep grid is empty");
    }
    let datasets = repeat_datasets(&args.source, args.repeats)?;

    let cells: Vec<(usize, usize)> = (0..algos.len())
        .flat_map(|a| (0..etas.len()).map(move |e| (a, e)))
        .collect();
    let results: Vec<Result<CellResult>> = pool(args.workers)?.install(|| {
        cells
            .par_iter()
            .map(|&(a, e)| {
                run_cell(algos[a], etas[e], loss, args.clip, args.metric_zero_one, &datasets)
            })
            .collect()
    });
    let results: Vec<CellResult> = results.into_iter().collect::<Result<_>>()?;

    // best (starred) cell per algorithm by the ranking objective;
    // cells are laid out algo-major, so a * etas.len() is algo a's first
    let objective = |r: &CellResult| r.metric.unwrap_or(r.progressive);
    let mut best_per_algo: Vec<usize> = (0..algos.len()).map(|a| a * etas.len()).collect();
    for (idx, &(a, _)) in cells.iter().enumerate() {
        if objective(&results[idx]) < objective(&results[best_per_algo[a]]) {
            best_per_algo[a] = idx;
        }
    }

    let mut sink = open_sink(&args.out)?;
    if args.metric_zero_one {
        writeln!(sink, "algorithm,eta,progressive_loss,zero_one_loss,ci_lo,ci_hi,best")?;
    } else {
        writeln!(sink, "algorithm,eta,progressive_loss,best")?;
    }
    for (idx, &(a, e)) in cells.iter().enumerate() {
        let r = &results[idx];
        let star = if best_per_algo[a] == idx { "*" } else { "" };
        if args.metric_zero_one {
            let m = r.metric.unwrap_or(0.0);
            let (lo, hi) = kl_chernoff_interval(m.clamp(0.0, 1.0), r.examples.max(1), 0.1);
            writeln!(
                sink,
                "{},{:.6e},{:.10e},{:.10e},{:.6e},{:.6e},{}",
                algos[a], etas[e], r.progressive, m, lo, hi, star
            )?;
        } else {
            writeln!(sink, "{},{:.6e},{:.10e},{}", algos[a], etas[e], r.progressive, star)?;
        }
    }
    sink.flush()?;

    eprintln!("sweep source: {}", args.source.describe());
    for (a, algo) in algos.iter().enumerate() {
        let idx = best_per_algo[a];
        eprintln!(
            "best {}: eta={:.6e} loss={:.10e}",
            algo,
            etas[cells[idx].1],
            objective(&results[idx])
        );
    }
    Ok(Outcome::Success)
}

use std::io::Write;

#[derive(Args, Debug)]
pub struct ScaleArgs {
    /// Comma-separated scale factors for the first feature
    #[arg(long, default_value = "1e-3,1e-2,1e-1,1,1e1,1e2,1e3,1e4,1e5")]
    pub scales: String,

    #[arg(long, default_value = "nag,adagrad")]
    pub algos: String,

    #[arg(long, default_value_t = 2000)]
    pub t: usize,

    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    #[arg(long, default_value_t = 1e-7)]
    pub eta_min: f64,

    #[arg(long, default_value_t = 20.0)]
    pub eta_max: f64,

    #[arg(long, default_value_t = 5)]
    pub points_per_decade: usize,

    #[arg(long)]
    pub workers: Option<usize>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct ScaleCell {
    pub scale: f64,
    pub algorithm: Algorithm,
    pub best_eta: f64,
    pub best_loss: f64,
}

/// Sweeps eta per (scale, algorithm) on the two-feature dataset with an
/// adversarially scaled first coordinate; the latents are identical
/// across scales (same seed), only the scaling differs.
pub fn scale_experiment(
    scales: &[f64],
    algos: &[Algorithm],
    t: usize,
    noise: f64,
    seed: u64,
    etas: &[f64],
) -> Result<Vec<ScaleCell>> {
    let datasets: Vec<Vec<Example>> = scales
        .iter()
        .map(|&s| {
            let mut spec = SyntheticSpec::new(SyntheticKind::ScaledTwoFeature, t, 2, seed);
            spec.scale_factor = s;
            spec.noise = noise;
            spec.generate()
        })
        .collect();

    let cells: Vec<(usize, usize)> = (0..scales.len())
        .flat_map(|s| (0..algos.len()).map(move |a| (s, a)))
        .collect();
    let best: Vec<Result<(f64, f64)>> = cells
        .par_iter()
        .map(|&(s, a)| {
            let mut best_eta = etas[0];
            let mut best_loss = f64::INFINITY;
            for &eta in etas {
                let config = LearnerConfig::new(algos[a], eta, Loss::Squared);
                let res = run_on(&config, &datasets[s], RunOptions::default())?;
                if res.progressive_loss < best_loss {
                    best_loss = res.progressive_loss;
                    best_eta = eta;
                }
            }
            Ok((best_eta, best_loss))
        })
        .collect();

    let mut out = Vec::with_capacity(cells.len());
    for (idx, &(s, a)) in cells.iter().enumerate() {
        let (best_eta, best_loss) = match &best[idx] {
            Ok(v) => *v,
            Err(e) => bail!("cell failed: {e}"),
        };
        out.push(ScaleCell {
            scale: scales[s],
            algorithm: algos[a],
            best_eta,
            best_loss,
        });
    }
    Ok(out)
}

pub fn run_scale_experiment(args: ScaleArgs) -> Result<Outcome> {
    let scales: Vec<f64> = args
        .scales
        .split(',')
        .map(|s| s.trim().parse::<f64>().context("bad scale value"))
        .collect::<Result<_>>()?;
    let algos = parse_algos(&args.algos)?;
    let etas = eta_grid(args.eta_min, args.eta_max, args.points_per_decade);
    let cells = pool(args.workers)?.install(|| {
        scale_experiment(&scales, &algos, args.t, args.noise, args.seed, &etas)
    })?;

    let mut sink = open_sink(&args.out)?;
    writeln!(sink, "scale,algorithm,best_eta,best_loss,seed")?;
    for cell in &cells {
        writeln!(
            sink,
            "{:.6e},{},{:.6e},{:.10e},{}",
            cell.scale, cell.algorithm, cell.best_eta, cell.best_loss, args.seed
        )?;
    }
    sink.flush()?;
    Ok(Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_every_reported_optimum() {
        // the widest published optima run from 5.5e-7 up to 16.4
        let etas = eta_grid(1e-7, 20.0, 5);
        assert!(etas[0] <= 5.5e-7);
        assert!(*etas.last().unwrap() >= 16.4);
        for win in etas.windows(2) {
            let ratio = win[1] / win[0];
            assert!(ratio > 1.0 && ratio < 10f64.powf(0.2) + 1e-9, "uneven grid step");
        }
    }

    #[test]
    fn single_point_grid() {
        assert_eq!(eta_grid(0.5, 0.5, 5), vec![0.5]);
    }
}
