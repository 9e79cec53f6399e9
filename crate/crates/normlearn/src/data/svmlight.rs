//! Streaming svmlight/libsvm text parsing: `label (index:value)*` with
//! 1-based indices, stored 0-based. Zero values are dropped (absent and
//! zero are the same thing); duplicate indices are rejected.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::data::{DataError, LabelMapping};
use crate::sparse::{Example, SparseVec};

pub fn parse_svmlight_line(line: &str, line_no: usize) -> Result<Example, DataError> {
    let err = |what: String| DataError::Parse { line: line_no, what };
    let mut tokens = line.split_whitespace();
    let label_tok = tokens.next().ok_or_else(|| err("empty line".into()))?;
    let label: f64 = label_tok
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| err(format!("bad label `{label_tok}`")))?;

    let mut pairs: Vec<(u32, f64)> = Vec::new();
    for tok in tokens {
        let (idx_s, val_s) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("expected index:value, found `{tok}`")))?;
        let idx: u32 = idx_s
            .parse()
            .ok()
            .filter(|&i| i >= 1)
            .ok_or_else(|| err(format!("bad feature index `{idx_s}` (must be >= 1)")))?;
        let val: f64 = val_s
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(format!("bad feature value `{val_s}`")))?;
        let id = idx - 1;
        if pairs.iter().any(|&(existing, _)| existing == id) {
            return Err(err(format!("duplicate feature index {idx}")));
        }
        pairs.push((id, val));
    }
    let features = SparseVec::from_pairs(pairs).map_err(|e| err(e.to_string()))?;
    Ok(Example::new(features, label))
}

/// Canonical text form: `label index:value ...` with ascending 1-based
/// indices and shortest round-trip float formatting.
pub fn serialize_example(example: &Example) -> String {
    let mut out = format!("{}", example.label);
    for (id, v) in example.features.iter() {
        out.push_str(&format!(" {}:{}", id + 1, v));
    }
    out
}

/// Line-by-line reader; skips blank lines and `#` comment lines.
pub struct SvmlightReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    mapping: LabelMapping,
}

impl<R: BufRead> SvmlightReader<R> {
    pub fn new(reader: R, mapping: LabelMapping) -> Self {
        Self { lines: reader.lines(), line_no: 0, mapping }
    }
}

impl SvmlightReader<BufReader<File>> {
    pub fn open(path: &Path, mapping: LabelMapping) -> Result<Self, DataError> {
        Ok(Self::new(BufReader::new(File::open(path)?), mapping))
    }
}

impl<R: BufRead> Iterator for SvmlightReader<R> {
    type Item = Result<Example, DataError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(DataError::Io(e))),
            };
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some(parse_svmlight_line(trimmed, self.line_no).and_then(|mut e| {
                e.label = self.mapping.apply(e.label, self.line_no)?;
                Ok(e)
            }));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_line() {
        let e = parse_svmlight_line("1 3:2.5", 1).unwrap();
        assert_eq!(e.label, 1.0);
        assert_eq!(e.features.iter().collect::<Vec<_>>(), vec![(2, 2.5)]);
    }

    #[test]
    fn zero_value_dropped() {
        let e = parse_svmlight_line("-1 1:0", 1).unwrap();
        assert_eq!(e.label, -1.0);
        assert!(e.features.is_empty());
    }

    #[test]
    fn duplicate_index_rejected() {
        let err = parse_svmlight_line("1 2:1 2:3", 7).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 7, .. }));
        // duplicates are errors even when one occurrence is zero
        assert!(parse_svmlight_line("1 2:0 2:3", 1).is_err());
    }

    #[test]
    fn malformed_tokens_rejected() {
        assert!(parse_svmlight_line("", 1).is_err());
        assert!(parse_svmlight_line("abc 1:2", 1).is_err());
        assert!(parse_svmlight_line("1 0:2", 1).is_err()); // indices start at 1
        assert!(parse_svmlight_line("1 x:2", 1).is_err());
        assert!(parse_svmlight_line("1 2:xyz", 1).is_err());
        assert!(parse_svmlight_line("1 23", 1).is_err());
        assert!(parse_svmlight_line("nan 1:1", 1).is_err());
        assert!(parse_svmlight_line("1 1:inf", 1).is_err());
    }

    #[test]
    fn reader_skips_comments_and_blank_lines() {
        let text = "# comment\n1 1:2\n\n-1 2:3\n";
        let reader = SvmlightReader::new(text.as_bytes(), LabelMapping::Identity);
        let examples: Vec<Example> = reader.map(|r| r.unwrap()).collect();
        assert_eq!(examples.len(), 2);
        assert_eq!(examples[1].features.get(1), 3.0);
    }

    #[test]
    fn reader_applies_label_mapping() {
        let text = "0 1:1\n1 1:2\n";
        let reader = SvmlightReader::new(text.as_bytes(), LabelMapping::ZeroOneToPm1);
        let labels: Vec<f64> = reader.map(|r| r.unwrap().label).collect();
        assert_eq!(labels, vec![-1.0, 1.0]);
    }

    #[test]
    fn reader_reports_line_numbers() {
        let text = "1 1:2\nbroken\n";
        let mut reader = SvmlightReader::new(text.as_bytes(), LabelMapping::Identity);
        assert!(reader.next().unwrap().is_ok());
        match reader.next().unwrap() {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        /// serialize . parse is the identity on canonical lines, and
        /// parse . serialize is the identity on examples.
        #[test]
        fn round_trip(
            label in -100.0f64..100.0,
            pairs in prop::collection::btree_map(0u32..50, -100.0f64..100.0, 0..8),
        ) {
            let features = SparseVec::from_pairs(pairs).unwrap();
            let example = Example::new(features, label);
            let line = serialize_example(&example);
            let parsed = parse_svmlight_line(&line, 1).unwrap();
            prop_assert_eq!(&parsed, &example);
            prop_assert_eq!(serialize_example(&parsed), line);
        }
    }
}
