//! On-disk instance directories.
//!
//! Layout:
//!
//! ```text
//! DIR/instance.meta      key = value lines (kind, c, cbar, box, file names, V*)
//! DIR/A.bin              dense matrix, column-major
//! DIR/A.indptr|indices|data   CSR triple when stored sparse
//! DIR/b.bin, DIR/xstar.bin    vectors (stored as n×1 matrices)
//! ```
//!
//! Every binary file starts with one ASCII header line
//! `rows=R cols=C dtype=f64|u64 order=col` followed by little-endian payload.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{GroupLassoInstance, Instance, LassoInstance, LogisticInstance, NcvxQpInstance};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix, Matrix};
use crate::model::{BlockStructure, KnownOptimum};

pub const META_FILE: &str = "instance.meta";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F64,
    U64,
}

impl Dtype {
    fn as_str(self) -> &'static str {
        match self {
            Dtype::F64 => "f64",
            Dtype::U64 => "u64",
        }
    }
}

fn write_header(w: &mut impl Write, rows: usize, cols: usize, dtype: Dtype) -> Result<()> {
    writeln!(w, "rows={rows} cols={cols} dtype={} order=col", dtype.as_str())?;
    Ok(())
}

fn write_f64_file(path: &Path, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + 8 * values.len());
    write_header(&mut buf, rows, cols, Dtype::F64)?;
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

fn write_u64_file(path: &Path, values: &[usize]) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + 8 * values.len());
    write_header(&mut buf, values.len(), 1, Dtype::U64)?;
    for v in values {
        buf.extend_from_slice(&(*v as u64).to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

struct RawArray {
    rows: usize,
    cols: usize,
    dtype: Dtype,
    payload: Vec<u8>,
}

fn read_raw(path: &Path) -> Result<RawArray> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let mut rows = None;
    let mut cols = None;
    let mut dtype = None;
    for kv in header.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("{}: malformed header field `{kv}`", path.display()),
        })?;
        let bad = || Error::Parse {
            line: 1,
            msg: format!("{}: invalid value for {k}", path.display()),
        };
        match k {
            "rows" => rows = Some(v.parse().map_err(|_| bad())?),
            "cols" => cols = Some(v.parse().map_err(|_| bad())?),
            "dtype" => {
                dtype = Some(match v {
                    "f64" => Dtype::F64,
                    "u64" => Dtype::U64,
                    _ => return Err(bad()),
                })
            }
            "order" if v == "col" => {}
            _ => return Err(bad()),
        }
    }
    let missing = |f: &str| Error::Parse {
        line: 1,
        msg: format!("{}: header lacks `{f}`", path.display()),
    };
    let (rows, cols, dtype) = (
        rows.ok_or_else(|| missing("rows"))?,
        cols.ok_or_else(|| missing("cols"))?,
        dtype.ok_or_else(|| missing("dtype"))?,
    );
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != 8 * rows * cols {
        return Err(Error::Data(format!(
            "{}: expected {} payload bytes, found {}",
            path.display(),
            8 * rows * cols,
            payload.len()
        )));
    }
    Ok(RawArray {
        rows,
        cols,
        dtype,
        payload,
    })
}

fn read_f64_file(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let raw = read_raw(path)?;
    if raw.dtype != Dtype::F64 {
        return Err(Error::Data(format!("{}: expected dtype f64", path.display())));
    }
    let values = raw
        .payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((raw.rows, raw.cols, values))
}

fn read_u64_file(path: &Path) -> Result<Vec<usize>> {
    let raw = read_raw(path)?;
    if raw.dtype != Dtype::U64 {
        return Err(Error::Data(format!("{}: expected dtype u64", path.display())));
    }
    Ok(raw
        .payload
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect())
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let (_, cols, v) = read_f64_file(path)?;
    if cols != 1 {
        return Err(Error::Data(format!("{}: expected a column vector", path.display())));
    }
    Ok(v)
}

fn write_matrix(dir: &Path, stem: &str, a: &Matrix, meta: &mut Vec<(String, String)>) -> Result<()> {
    match a {
        Matrix::Dense(d) => {
            let file = format!("{stem}.bin");
            write_f64_file(&dir.join(&file), d.rows(), d.cols(), d.as_col_major())?;
            meta.push(("matrix".into(), file));
            meta.push(("storage".into(), "dense".into()));
        }
        Matrix::Sparse(s) => {
            let csr = s.to_csr();
            write_u64_file(&dir.join(format!("{stem}.indptr")), &csr.indptr)?;
            write_u64_file(&dir.join(format!("{stem}.indices")), &csr.indices)?;
            write_f64_file(&dir.join(format!("{stem}.data")), csr.data.len(), 1, &csr.data)?;
            meta.push(("matrix".into(), stem.into()));
            meta.push(("storage".into(), "csr".into()));
            meta.push(("rows".into(), csr.rows.to_string()));
            meta.push(("cols".into(), csr.cols.to_string()));
        }
    }
    Ok(())
}

fn read_matrix(dir: &Path, meta: &Meta) -> Result<Matrix> {
    let file = meta.get("matrix")?;
    match meta.get("storage")? {
        "dense" => {
            let (rows, cols, data) = read_f64_file(&dir.join(file))?;
            Ok(Matrix::Dense(DenseMatrix::from_col_major(rows, cols, data)))
        }
        "csr" => {
            let csr = CsrMatrix {
                rows: meta.parse("rows")?,
                cols: meta.parse("cols")?,
                indptr: read_u64_file(&dir.join(format!("{file}.indptr")))?,
                indices: read_u64_file(&dir.join(format!("{file}.indices")))?,
                data: read_vector(&dir.join(format!("{file}.data")))?,
            };
            csr.validate().map_err(Error::Data)?;
            Ok(Matrix::Sparse(csr.to_csc()))
        }
        other => Err(Error::Data(format!("unknown storage `{other}`"))),
    }
}

struct Meta(BTreeMap<String, String>);

impl Meta {
    fn get(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Data(format!("metadata lacks `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::Data(format!("metadata `{key}` has invalid value `{v}`")))
    }
}

fn read_meta(dir: &Path) -> Result<Meta> {
    let text = fs::read_to_string(dir.join(META_FILE))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key = value, found `{line}`"),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(Meta(map))
}

/// Writes `inst` into `dir` (created if needed). `extra` entries are recorded
/// in the metadata file verbatim and ignored on load.
pub fn save_instance(dir: impl AsRef<Path>, inst: &Instance, extra: &[(String, String)]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut meta: Vec<(String, String)> = vec![("kind".into(), inst.kind().into())];
    match inst {
        Instance::Lasso(l) => {
            meta.push(("c".into(), format!("{:?}", l.c)));
            write_matrix(dir, "A", &l.a, &mut meta)?;
            write_f64_file(&dir.join("b.bin"), l.b.len(), 1, &l.b)?;
            meta.push(("rhs".into(), "b.bin".into()));
            if let Some(opt) = &l.known_optimum {
                write_f64_file(&dir.join("xstar.bin"), opt.x.len(), 1, &opt.x)?;
                meta.push(("x_star".into(), "xstar.bin".into()));
                meta.push(("v_star".into(), format!("{:?}", opt.value)));
            }
        }
        Instance::GroupLasso(g) => {
            meta.push(("c".into(), format!("{:?}", g.c)));
            let sizes: Vec<String> = g.blocks.sizes().iter().map(|s| s.to_string()).collect();
            meta.push(("blocks".into(), sizes.join(",")));
            write_matrix(dir, "A", &g.a, &mut meta)?;
            write_f64_file(&dir.join("b.bin"), g.b.len(), 1, &g.b)?;
            meta.push(("rhs".into(), "b.bin".into()));
        }
        Instance::NcvxQp(q) => {
            meta.push(("c".into(), format!("{:?}", q.c)));
            meta.push(("cbar".into(), format!("{:?}", q.cbar)));
            meta.push(("box".into(), format!("{:?}", q.b_box)));
            write_matrix(dir, "A", &q.a, &mut meta)?;
            write_f64_file(&dir.join("b.bin"), q.b.len(), 1, &q.b)?;
            meta.push(("rhs".into(), "b.bin".into()));
        }
        Instance::Logistic(l) => {
            meta.push(("c".into(), format!("{:?}", l.c)));
            write_matrix(dir, "Y", &l.y, &mut meta)?;
            write_f64_file(&dir.join("labels.bin"), l.labels.len(), 1, &l.labels)?;
            meta.push(("labels".into(), "labels.bin".into()));
        }
    }
    meta.extend(extra.iter().cloned());
    let mut text = String::new();
    for (k, v) in &meta {
        text.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(dir.join(META_FILE), text)?;
    Ok(())
}

/// Loads an instance directory written by [`save_instance`].
pub fn load_instance(dir: impl AsRef<Path>) -> Result<Instance> {
    let dir = dir.as_ref();
    let meta = read_meta(dir)?;
    let c: f64 = meta.parse("c")?;
    let a = read_matrix(dir, &meta)?;
    match meta.get("kind")? {
        "lasso" => {
            let b = read_vector(&dir.join(meta.get("rhs")?))?;
            let mut inst = LassoInstance::new(a, b, c)?;
            if let Ok(file) = meta.get("x_star") {
                let x = read_vector(&dir.join(file))?;
                inst = inst.with_optimum(x, meta.parse("v_star")?);
            }
            Ok(Instance::Lasso(inst))
        }
        "group_lasso" => {
            let b = read_vector(&dir.join(meta.get("rhs")?))?;
            let sizes = meta
                .get("blocks")?
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Data("invalid block sizes".into()))?;
            Ok(Instance::GroupLasso(GroupLassoInstance::new(a, b, c, BlockStructure::new(sizes)?)?))
        }
        "ncvxqp" => {
            let b = read_vector(&dir.join(meta.get("rhs")?))?;
            Ok(Instance::NcvxQp(NcvxQpInstance::new(
                a,
                b,
                c,
                meta.parse("cbar")?,
                meta.parse("box")?,
            )?))
        }
        "logistic" => {
            let labels = read_vector(&dir.join(meta.get("labels")?))?;
            Ok(Instance::Logistic(LogisticInstance::new(a, labels, c)?))
        }
        other => Err(Error::Data(format!("unknown instance kind `{other}`"))),
    }
}

/// Reads the known optimum carried by a LASSO instance directory, if any.
pub fn known_optimum(inst: &Instance) -> Option<&KnownOptimum> {
    match inst {
        Instance::Lasso(l) => l.known_optimum.as_ref(),
        _ => None,
    }
}
