//! Command-line surface: train, sweep, generate, scale-experiment,
//! stats, verify. Exit codes: 0 success, 1 check failure, 2 usage or
//! i/o error. Every command is deterministic given explicit seeds.

pub mod significance;
pub mod sweep;
pub mod train;
pub mod verify;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::data::{
    dataset_stats, prenormalize, serialize_example, CsvReader, DataError, LabelMapping,
    PrenormMode, SvmlightReader, SyntheticKind, SyntheticSpec,
};
use crate::sparse::Example;

pub use significance::{kl_bernoulli, kl_chernoff_interval};

#[derive(Parser)]
#[command(
    name = "normlearn",
    version,
    about = "Scale-invariant online linear learning (NG/NAG/sNAG) with baselines and executable regret-bound checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train one learner over a stream, progressive-validation style
    Train(train::TrainArgs),
    /// Grid-search learning rates across algorithms
    Sweep(sweep::SweepArgs),
    /// Emit a synthetic dataset in svmlight format
    Generate(GenerateArgs),
    /// Best-loss-per-scale comparison on the two-feature scaling dataset
    ScaleExperiment(sweep::ScaleArgs),
    /// Dataset statistics (sizes, label range, feature scale range)
    Stats(StatsArgs),
    /// Run the bound/lemma verification suite
    Verify(verify::VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CheckFailure,
}

pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::CheckFailure) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Train(args) => train::run(args),
        Command::Sweep(args) => sweep::run_sweep(args),
        Command::Generate(args) => run_generate(args),
        Command::ScaleExperiment(args) => sweep::run_scale_experiment(args),
        Command::Stats(args) => run_stats(args),
        Command::Verify(args) => verify::run(args),
    }
}

/// Where examples come from: a file (svmlight or CSV) or a synthetic
/// generator, with optional label mapping and pre-normalization.
#[derive(Args, Debug, Clone)]
pub struct SourceArgs {
    /// Input data file
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,

    /// Input format: svmlight or csv
    #[arg(long, default_value = "svmlight")]
    pub format: String,

    /// CSV label column (header name, or 0-based index)
    #[arg(long, default_value = "label")]
    pub label_col: String,

    /// Label mapping: identity or zero-one (maps {0,1} to {-1,+1})
    #[arg(long, default_value = "identity")]
    pub label_map: String,

    /// Generate data instead of reading a file
    #[arg(long, value_name = "KIND")]
    pub synthetic: Option<String>,

    /// Synthetic: number of examples
    #[arg(long, default_value_t = 1000)]
    pub t: usize,

    /// Synthetic: number of features
    #[arg(long, default_value_t = 2)]
    pub d: usize,

    /// Synthetic: scale of the first feature / spread of feature scales
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,

    /// Synthetic: multiplier applied to every feature value
    #[arg(long, default_value_t = 1.0)]
    pub global_scale: f64,

    /// Synthetic: label noise standard deviation
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    /// Synthetic generator seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Pre-normalize features first: maxnorm or sqnorm
    #[arg(long, value_name = "MODE")]
    pub prenormalize: Option<String>,
}

impl SourceArgs {
    pub fn label_mapping(&self) -> Result<LabelMapping> {
        self.label_map.parse::<LabelMapping>().map_err(|e| anyhow::anyhow!(e))
    }

    fn synthetic_spec(&self, kind_str: &str) -> Result<SyntheticSpec> {
        let kind: SyntheticKind = kind_str.parse().map_err(|e: String| anyhow::anyhow!(e))?;
        Ok(SyntheticSpec {
            kind,
            t: self.t,
            d: self.d,
            scale_factor: self.scale,
            global_scale: self.global_scale,
            noise: self.noise,
            seed: self.seed,
        })
    }

    /// Streams examples without materializing when possible. Synthetic
    /// sources and pre-normalization materialize.
    pub fn stream(&self) -> Result<Box<dyn Iterator<Item = Result<Example, DataError>>>> {
        if self.prenormalize.is_some() {
            let data = self.load_all()?;
            return Ok(Box::new(data.into_iter().map(Ok)));
        }
        if let Some(kind) = &self.synthetic {
            let data = self.synthetic_spec(kind)?.generate();
            return Ok(Box::new(data.into_iter().map(Ok)));
        }
        let path = self
            .data
            .as_ref()
            .context("either --data or --synthetic is required")?;
        let mapping = self.label_mapping()?;
        match self.format.as_str() {
            "svmlight" => {
                let reader = SvmlightReader::open(path, mapping)
                    .with_context(|| format!("cannot open {}", path.display()))?;
                Ok(Box::new(reader))
            }
            "csv" => {
                let file = File::open(path)
                    .with_context(|| format!("cannot open {}", path.display()))?;
                let reader = CsvReader::new(file, &self.label_col, mapping)?;
                Ok(Box::new(reader))
            }
            other => bail!("unknown format `{other}` (expected svmlight or csv)"),
        }
    }

    /// Materializes the whole dataset (needed by sweeps and two-pass
    /// operations), applying pre-normalization when requested.
    pub fn load_all(&self) -> Result<Vec<Example>> {
        let raw: Result<Vec<Example>, DataError> = if let Some(kind) = &self.synthetic {
            Ok(self.synthetic_spec(kind)?.generate())
        } else {
            let path = self
                .data
                .as_ref()
                .context("either --data or --synthetic is required")?;
            let mapping = self.label_mapping()?;
            match self.format.as_str() {
                "svmlight" => SvmlightReader::open(path, mapping)
                    .with_context(|| format!("cannot open {}", path.display()))?
                    .collect(),
                "csv" => {
                    let file = File::open(path)
                        .with_context(|| format!("cannot open {}", path.display()))?;
                    CsvReader::new(file, &self.label_col, mapping)?.collect()
                }
                other => bail!("unknown format `{other}` (expected svmlight or csv)"),
            }
        };
        let mut data = raw?;
        if let Some(mode_str) = &self.prenormalize {
            let mode: PrenormMode =
                mode_str.parse().map_err(|e: String| anyhow::anyhow!(e))?;
            data = prenormalize(&data, mode).examples;
        }
        Ok(data)
    }

    pub fn describe(&self) -> String {
        match (&self.synthetic, &self.data) {
            (Some(kind), _) => format!(
                "synthetic kind={kind} t={} d={} scale={} global_scale={} noise={} seed={}",
                self.t, self.d, self.scale, self.global_scale, self.noise, self.seed
            ),
            (None, Some(path)) => format!("file {}", path.display()),
            (None, None) => "unspecified".to_string(),
        }
    }
}

/// Writes either to a file or stdout.
pub(crate) fn open_sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    match out {
        Some(path) => {
            let f = File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// scaled-two-feature, range-band or exponential
    #[arg(long)]
    pub kind: String,

    #[arg(long, default_value_t = 1000)]
    pub t: usize,

    #[arg(long, default_value_t = 2)]
    pub d: usize,

    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,

    #[arg(long, default_value_t = 1.0)]
    pub global_scale: f64,

    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Output path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run_generate(args: GenerateArgs) -> Result<Outcome> {
    let kind: SyntheticKind = args.kind.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    let spec = SyntheticSpec {
        kind,
        t: args.t,
        d: args.d,
        scale_factor: args.scale,
        global_scale: args.global_scale,
        noise: args.noise,
        seed: args.seed,
    };
    let data = spec.generate();
    let mut sink = open_sink(&args.out)?;
    writeln!(
        sink,
        "# synthetic kind={} t={} d={} scale={} global_scale={} noise={} seed={}",
        args.kind, args.t, args.d, args.scale, args.global_scale, args.noise, args.seed
    )?;
    for e in &data {
        writeln!(sink, "{}", serialize_example(e))?;
    }
    sink.flush()?;
    Ok(Outcome::Success)
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub source: SourceArgs,
}

fn run_stats(args: StatsArgs) -> Result<Outcome> {
    let data = args.source.load_all()?;
    let stats = dataset_stats(&data).context("dataset is empty")?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "source {}", args.source.describe())?;
    writeln!(out, "examples {}", stats.examples)?;
    writeln!(out, "features {}", stats.features)?;
    writeln!(out, "nonzeros {}", stats.nonzeros)?;
    writeln!(out, "label_min {}", stats.label_min)?;
    writeln!(out, "label_max {}", stats.label_max)?;
    writeln!(out, "label_mean {}", stats.label_mean)?;
    writeln!(out, "scale_min {}", stats.scale_min)?;
    writeln!(out, "scale_max {}", stats.scale_max)?;
    writeln!(out, "scale_range [{}, {}]", stats.scale_min, stats.scale_max)?;
    Ok(Outcome::Success)
}
