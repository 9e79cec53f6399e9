//! `verify`: runs the bound/lemma suite with fixed seeds and prints one
//! block per check, or validates a user-supplied trace file against the
//! regret decomposition.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use crate::cli::Outcome;
use crate::loss::Loss;
use crate::sparse::SparseVec;
use crate::theory::checks::check_lemma1;
use crate::theory::suite::{run_named, SuiteOptions, CHECK_NAMES};
use crate::theory::trace::RunTrace;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Run only the named check (repeatable); one of: invariance, lemma1,
    /// lemma4, lemma5, corollary, theorem1, theorem2, p2, projection
    #[arg(long)]
    pub only: Vec<String>,

    /// Instance/vector/permutation count override for the selected checks
    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Iteration budget for the constrained comparator solves
    #[arg(long, default_value_t = 200_000)]
    pub comparator_iters: usize,

    /// Validate a recorded trace file instead (regret decomposition with
    /// the zero comparator)
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,

    /// Loss used for the trace's loss-regret side
    #[arg(long, default_value = "squared")]
    pub loss: String,
}

pub fn run(args: VerifyArgs) -> Result<Outcome> {
    let mut out = std::io::stdout().lock();

    if let Some(path) = &args.trace {
        let file =
            File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let trace = RunTrace::read_from(BufReader::new(file))
            .with_context(|| format!("reading trace {}", path.display()))?;
        let loss: Loss = args.loss.parse()?;
        let rep = check_lemma1(&trace, &SparseVec::new(), loss)?;
        writeln!(out, "trace {} rounds={}", path.display(), trace.len())?;
        writeln!(
            out,
            "lemma1 linearized lhs={:.10e} rhs={:.10e} holds={} tolerance=1e-9",
            rep.linearized.lhs, rep.linearized.rhs, rep.linearized.holds
        )?;
        writeln!(
            out,
            "lemma1 loss_regret lhs={:.10e} rhs={:.10e} holds={} tolerance=1e-9",
            rep.loss_regret.lhs, rep.loss_regret.rhs, rep.loss_regret.holds
        )?;
        return Ok(if rep.linearized.holds && rep.loss_regret.holds {
            Outcome::Success
        } else {
            Outcome::CheckFailure
        });
    }

    let names: Vec<&str> = if args.only.is_empty() {
        CHECK_NAMES.to_vec()
    } else {
        args.only.iter().map(|s| s.as_str()).collect()
    };
    let opts = SuiteOptions {
        n: args.n,
        seed: args.seed,
        comparator_iterations: args.comparator_iters,
    };

    let mut failed = 0usize;
    for name in &names {
        let check = run_named(name, &opts)?;
        writeln!(out, "== check {} seed={}", check.name, check.seed)?;
        for line in &check.lines {
            writeln!(out, "   {line}")?;
        }
        writeln!(out, "-> {}", if check.passed { "PASS" } else { "FAIL" })?;
        if !check.passed {
            failed += 1;
        }
    }
    writeln!(out, "summary checks={} failed={}", names.len(), failed)?;
    Ok(if failed == 0 { Outcome::Success } else { Outcome::CheckFailure })
}
