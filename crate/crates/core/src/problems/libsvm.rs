//! LIBSVM / svmlight text format: `label idx:val idx:val ...` with 1-based
//! feature indices.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::LogisticInstance;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};

/// Reference dataset sizes and regularization weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetInfo {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub c: f64,
}

pub const DATASETS: [DatasetInfo; 3] = [
    DatasetInfo {
        name: "gisette",
        rows: 6000,
        cols: 5000,
        c: 0.25,
    },
    DatasetInfo {
        name: "real-sim",
        rows: 72309,
        cols: 20958,
        c: 4.0,
    },
    DatasetInfo {
        name: "rcv1",
        rows: 677399,
        cols: 47236,
        c: 4.0,
    },
];

/// Looks up a dataset by name, ignoring case and a `_scale`/`.scale` suffix.
pub fn dataset_info(name: &str) -> Option<DatasetInfo> {
    let lower = name.to_ascii_lowercase();
    let stem = lower
        .trim_end_matches("_scale")
        .trim_end_matches(".scale")
        .trim_end_matches(".svm")
        .trim_end_matches(".txt");
    DATASETS.iter().copied().find(|d| d.name == stem || d.name.replace('-', "_") == stem)
}

fn parse_label(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid label `{tok}`"),
    })?;
    match v {
        v if v == 1.0 => Ok(1.0),
        v if v == -1.0 || v == 0.0 => Ok(-1.0),
        _ => Err(Error::Data(format!("line {line}: label {v} is not one of -1, +1, 0, 1"))),
    }
}

/// Parses LIBSVM text into a CSR matrix and labels.
pub fn parse_libsvm<R: Read>(reader: R) -> Result<(CsrMatrix, Vec<f64>)> {
    let mut indptr = vec![0usize];
    let mut indices = Vec::new();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut cols = 0usize;

    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let label = parse_label(toks.next().unwrap(), lineno)?;
        let start = indices.len();
        for tok in toks {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, found `{tok}`"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid feature index `{idx}`"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid feature value `{val}`"),
            })?;
            indices.push(idx - 1);
            data.push(val);
            cols = cols.max(idx);
        }
        // sort features within the row; duplicates are a format error
        let mut row: Vec<(usize, f64)> = indices[start..].iter().copied().zip(data[start..].iter().copied()).collect();
        row.sort_by_key(|e| e.0);
        if row.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse {
                line: lineno,
                msg: "duplicate feature index".into(),
            });
        }
        for (p, (j, v)) in row.into_iter().enumerate() {
            indices[start + p] = j;
            data[start + p] = v;
        }
        indptr.push(indices.len());
        labels.push(label);
    }
    let csr = CsrMatrix {
        rows: labels.len(),
        cols,
        indptr,
        indices,
        data,
    };
    Ok((csr, labels))
}

/// Reads a LIBSVM file as a logistic-regression instance with weight `c`.
pub fn read_libsvm(path: impl AsRef<Path>, c: f64) -> Result<LogisticInstance> {
    let (csr, labels) = parse_libsvm(File::open(path)?)?;
    if labels.is_empty() {
        return Err(Error::Data("empty LIBSVM file".into()));
    }
    LogisticInstance::new(Matrix::from_csr(&csr), labels, c)
}

/// Writes features and labels in LIBSVM format with round-trip float formatting.
pub fn write_libsvm<W: Write>(inst: &LogisticInstance, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let csr = inst.y.to_csr();
    for i in 0..csr.rows {
        write!(w, "{}", if inst.labels[i] > 0.0 { "+1" } else { "-1" })?;
        for p in csr.indptr[i]..csr.indptr[i + 1] {
            write!(w, " {}:{:?}", csr.indices[p] + 1, csr.data[p])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
