//! CSV ingestion: a header row, a designated label column, numeric
//! columns sparsified (zeros dropped) and categorical columns expanded
//! one-hot through a string interner. Column kinds are decided by the
//! first data row.

use std::collections::HashMap;
use std::io::Read;

use crate::data::{DataError, LabelMapping};
use crate::sparse::{Example, SparseVec};

/// Assigns dense feature ids to string keys in first-seen order.
#[derive(Debug, Default, Clone)]
pub struct Interner {
    map: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, key: &str) -> u32 {
        if let Some(&id) = self.map.get(key) {
            return id;
        }
        let id = self.names.len() as u32;
        self.map.insert(key.to_string(), id);
        self.names.push(key.to_string());
        id
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// (name, id) pairs in id order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u32)> + '_ {
        self.names.iter().enumerate().map(|(i, n)| (n.as_str(), i as u32))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Label,
    Numeric,
    Categorical,
}

pub struct CsvReader<R: Read> {
    records: ::csv::StringRecordsIntoIter<R>,
    header: Vec<String>,
    label_idx: usize,
    kinds: Option<Vec<ColumnKind>>,
    mapping: LabelMapping,
    interner: Interner,
    row: usize,
}

impl<R: Read> CsvReader<R> {
    /// `label_col` selects the label column by header name, or by 0-based
    /// index when it is not a header name but parses as an integer.
    pub fn new(reader: R, label_col: &str, mapping: LabelMapping) -> Result<Self, DataError> {
        let mut rdr = ::csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| DataError::Csv { row: 0, what: e.to_string() })?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let label_idx = match header.iter().position(|h| h == label_col) {
            Some(idx) => idx,
            None => label_col.parse::<usize>().ok().filter(|&i| i < header.len()).ok_or_else(
                || DataError::Csv {
                    row: 0,
                    what: format!("label column `{label_col}` not found in header"),
                },
            )?,
        };
        Ok(Self {
            records: rdr.into_records(),
            header,
            label_idx,
            kinds: None,
            mapping,
            interner: Interner::default(),
            row: 0,
        })
    }

    pub fn interner(&self) -> &Interner {
        &self.interner
    }

    pub fn into_interner(self) -> Interner {
        self.interner
    }

    fn decide_kinds(&mut self, record: &::csv::StringRecord) {
        let kinds = self
            .header
            .iter()
            .enumerate()
            .map(|(i, _)| {
                if i == self.label_idx {
                    ColumnKind::Label
                } else if record.get(i).is_some_and(|v| v.trim().parse::<f64>().is_ok()) {
                    ColumnKind::Numeric
                } else {
                    ColumnKind::Categorical
                }
            })
            .collect();
        self.kinds = Some(kinds);
    }

    fn parse_record(&mut self, record: &::csv::StringRecord) -> Result<Example, DataError> {
        let row = self.row;
        let err = |what: String| DataError::Csv { row, what };
        if record.len() != self.header.len() {
            return Err(err(format!(
                "ragged row: {} fields, header has {}",
                record.len(),
                self.header.len()
            )));
        }
        if self.kinds.is_none() {
            self.decide_kinds(record);
        }
        let kinds = self.kinds.clone().expect("kinds decided above");

        let mut label = 0.0;
        let mut pairs: Vec<(u32, f64)> = Vec::new();
        for (i, raw) in record.iter().enumerate() {
            let cell = raw.trim();
            match kinds[i] {
                ColumnKind::Label => {
                    let v: f64 = cell
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| err(format!("bad label `{cell}`")))?;
                    label = self.mapping.apply(v, row)?;
                }
                ColumnKind::Numeric => {
                    let v: f64 = cell
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| {
                            err(format!(
                                "non-numeric cell `{cell}` in numeric column `{}`",
                                self.header[i]
                            ))
                        })?;
                    if v != 0.0 {
                        let id = self.interner.intern(&format!("col:{}", self.header[i]));
                        pairs.push((id, v));
                    }
                }
                ColumnKind::Categorical => {
                    if !cell.is_empty() {
                        let id = self
                            .interner
                            .intern(&format!("{}={}", self.header[i], cell));
                        pairs.push((id, 1.0));
                    }
                }
            }
        }
        let features = SparseVec::from_pairs(pairs).map_err(|e| err(e.to_string()))?;
        Ok(Example::new(features, label))
    }
}

impl<R: Read> Iterator for CsvReader<R> {
    type Item = Result<Example, DataError>;

    fn next(&mut self) -> Option<Self::Item> {
        let record = match self.records.next()? {
            Ok(r) => r,
            Err(e) => {
                self.row += 1;
                let kind_is_len = matches!(e.kind(), ::csv::ErrorKind::UnequalLengths { .. });
                let what = if kind_is_len {
                    "ragged row (unequal field count)".to_string()
                } else {
                    e.to_string()
                };
                return Some(Err(DataError::Csv { row: self.row, what }));
            }
        };
        self.row += 1;
        Some(self.parse_record(&record))
    }
}
