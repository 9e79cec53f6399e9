//! Per-round run traces consumed by the bound verifiers, and their
//! newline-delimited text serialization (17 significant digits, so a
//! written trace reloads to the exact same floats).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::sparse::{support_union, SparseVec};

/// One round of a traced run: the input, the scored prediction, the loss
/// derivative g', the per-feature gradient g = g' x, the diagonal
/// conditioner used for the weight step, and the weights *before* the
/// step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRound {
    pub x: SparseVec,
    pub y: f64,
    pub yhat: f64,
    pub loss: f64,
    pub g_scalar: f64,
    pub g: SparseVec,
    pub a_diag: SparseVec,
    pub w: SparseVec,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rounds: Vec<TraceRound>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace parse error at line {line}: {what}")]
    Parse { line: usize, what: String },
    #[error("trace round {round} inconsistent: {what}")]
    Inconsistent { round: usize, what: String },
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Checks the structural invariant g = g' * x on every round.
    pub fn validate(&self) -> Result<(), TraceError> {
        for (idx, r) in self.rounds.iter().enumerate() {
            let ids = support_union([&r.x, &r.g]);
            for id in ids {
                let expect = r.g_scalar * r.x.get(id);
                let got = r.g.get(id);
                let tol = 1e-12 * expect.abs().max(got.abs()).max(1.0);
                if (expect - got).abs() > tol {
                    return Err(TraceError::Inconsistent {
                        round: idx + 1,
                        what: format!(
                            "g[{id}] = {got} but g_scalar * x[{id}] = {expect}"
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn total_loss(&self) -> f64 {
        self.rounds.iter().map(|r| r.loss).sum()
    }

    /// Per-feature sum of squared gradients over the whole trace.
    pub fn grad_sq_sums(&self) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        for r in &self.rounds {
            for (id, g) in r.g.iter() {
                *out.entry(id).or_insert(0.0) += g * g;
            }
        }
        out
    }

    /// Per-feature max |x| over the whole trace.
    pub fn max_abs(&self) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        for r in &self.rounds {
            for (id, x) in r.x.iter() {
                let m = out.entry(id).or_insert(0.0f64);
                *m = m.max(x.abs());
            }
        }
        out
    }

    /// |x| at the first round where each feature is non-zero.
    pub fn first_nonzero_abs(&self) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        for r in &self.rounds {
            for (id, x) in r.x.iter() {
                out.entry(id).or_insert_with(|| x.abs());
            }
        }
        out
    }

    /// All feature ids appearing anywhere in the inputs.
    pub fn feature_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.rounds.iter().flat_map(|r| r.x.ids()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Sum of squared loss derivatives g'_t.
    pub fn g_scalar_sq_sum(&self) -> f64 {
        self.rounds.iter().map(|r| r.g_scalar * r.g_scalar).sum()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        writeln!(w, "normlearn-trace v1")?;
        writeln!(w, "rounds {}", self.rounds.len())?;
        for (idx, r) in self.rounds.iter().enumerate() {
            write!(
                w,
                "{} {} {} {} {}",
                idx + 1,
                fmt_f64(r.y),
                fmt_f64(r.yhat),
                fmt_f64(r.loss),
                fmt_f64(r.g_scalar)
            )?;
            for (tag, vec) in [("x", &r.x), ("g", &r.g), ("a", &r.a_diag), ("w", &r.w)] {
                write!(w, " |{}", tag)?;
                for (id, v) in vec.iter() {
                    write!(w, " {}:{}", id, fmt_f64(v))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut lines = r.lines().enumerate();
        let header = next_line(&mut lines)?;
        if header.1.trim() != "normlearn-trace v1" {
            return Err(TraceError::Parse {
                line: header.0 + 1,
                what: "expected header `normlearn-trace v1`".into(),
            });
        }
        let (count_lineno, count_line) = next_line(&mut lines)?;
        let n: usize = count_line
            .strip_prefix("rounds ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| TraceError::Parse {
                line: count_lineno + 1,
                what: "expected `rounds <n>`".into(),
            })?;

        let mut rounds = Vec::with_capacity(n);
        for _ in 0..n {
            let (lineno, line) = next_line(&mut lines)?;
            rounds.push(parse_round(lineno + 1, &line, rounds.len() + 1)?);
        }
        let trace = RunTrace { rounds };
        trace.validate()?;
        Ok(trace)
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to vec cannot fail");
        String::from_utf8(buf).expect("trace text is ascii")
    }

    pub fn from_text(s: &str) -> Result<Self, TraceError> {
        Self::read_from(s.as_bytes())
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

fn next_line(
    lines: &mut impl Iterator<Item = (usize, std::io::Result<String>)>,
) -> Result<(usize, String), TraceError> {
    match lines.next() {
        Some((n, Ok(l))) => Ok((n, l)),
        Some((_, Err(e))) => Err(TraceError::Io(e)),
        None => Err(TraceError::Parse { line: 0, what: "unexpected end of trace".into() }),
    }
}

fn parse_round(line_no: usize, line: &str, expect_idx: usize) -> Result<TraceRound, TraceError> {
    let err = |what: String| TraceError::Parse { line: line_no, what };
    let mut tokens = line.split_whitespace().peekable();

    let idx: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| err("missing round index".into()))?;
    if idx != expect_idx {
        return Err(err(format!("round index {idx}, expected {expect_idx}")));
    }
    let mut scalar = |name: &str| -> Result<f64, TraceError> {
        tokens
            .next()
            .and_then(|t| t.parse::<f64>().ok())
            .filter(|v| !v.is_nan())
            .ok_or_else(|| err(format!("bad or missing {name}")))
    };
    let y = scalar("y")?;
    let yhat = scalar("yhat")?;
    let loss = scalar("loss")?;
    let g_scalar = scalar("g_scalar")?;

    let mut sections: Vec<SparseVec> = Vec::with_capacity(4);
    for tag in ["|x", "|g", "|a", "|w"] {
        match tokens.next() {
            Some(t) if t == tag => {}
            other => return Err(err(format!("expected section {tag}, found {other:?}"))),
        }
        let mut pairs = Vec::new();
        while let Some(&tok) = tokens.peek() {
            if tok.starts_with('|') {
                break;
            }
            let tok = tokens.next().unwrap();
            let (id_s, v_s) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected id:value token, found `{tok}`")))?;
            let id: u32 =
                id_s.parse().map_err(|_| err(format!("bad feature id `{id_s}`")))?;
            let v: f64 =
                v_s.parse().map_err(|_| err(format!("bad value `{v_s}`")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite value for feature {id}")));
            }
            pairs.push((id, v));
        }
        sections.push(
            SparseVec::from_pairs(pairs)
                .map_err(|e| err(format!("bad section {tag}: {e}")))?,
        );
    }
    let w = sections.pop().unwrap();
    let a_diag = sections.pop().unwrap();
    let g = sections.pop().unwrap();
    let x = sections.pop().unwrap();
    Ok(TraceRound { x, y, yhat, loss, g_scalar, g, a_diag, w })
}
