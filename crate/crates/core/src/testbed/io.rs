use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dmd::SnapshotSet;
use crate::error::{Error, Result};
use crate::numerics::{Complex64, ComplexMatrix, RealMatrix};

const MAGIC: &[u8; 4] = b"CDMC";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 24;
const DTYPE_REAL: u8 = 0;
const DTYPE_COMPLEX: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    /// Header plus little-endian column-major payload.
    Binary,
    /// Headerless numeric grid, one row per spatial index.
    Csv,
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Binary => "cdmc",
            MatrixFormat::Csv => "csv",
        }
    }

    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bin" | "cdmc" => Ok(MatrixFormat::Binary),
            "csv" => Ok(MatrixFormat::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown matrix format '{other}'"
            ))),
        }
    }
}

fn header(dtype: u8, rows: usize, cols: usize) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(MAGIC);
    h[4..6].copy_from_slice(&VERSION.to_le_bytes());
    h[6] = dtype;
    h[8..16].copy_from_slice(&(rows as u64).to_le_bytes());
    h[16..24].copy_from_slice(&(cols as u64).to_le_bytes());
    h
}

fn parse<'a>(bytes: &'a [u8], path: &Path) -> Result<(u8, usize, usize, &'a [u8])> {
    let ctx = path.display();
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "{ctx}: header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format(format!(
            "{ctx}: bad magic bytes (not a CDMC matrix file)"
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!(
            "{ctx}: unsupported version {version}"
        )));
    }
    let dtype = bytes[6];
    let width = match dtype {
        DTYPE_REAL => 8,
        DTYPE_COMPLEX => 16,
        other => return Err(Error::Format(format!("{ctx}: unknown dtype {other}"))),
    };
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("slice of 8"));
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("slice of 8"));
    let expected = (rows as u128) * (cols as u128) * width as u128 + HEADER_LEN as u128;
    if expected != bytes.len() as u128 {
        return Err(Error::Format(format!(
            "{ctx}: header declares {rows}×{cols} entries, expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    Ok((dtype, rows as usize, cols as usize, &bytes[HEADER_LEN..]))
}

fn non_finite(path: &Path, index: usize, rows: usize) -> Error {
    Error::NonFinite {
        context: path.display().to_string(),
        row: index % rows.max(1),
        col: index / rows.max(1),
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

fn f64_at(payload: &[u8], i: usize) -> f64 {
    f64::from_le_bytes(payload[8 * i..8 * i + 8].try_into().expect("slice of 8"))
}

pub fn write_matrix(path: &Path, m: &RealMatrix) -> Result<()> {
    match MatrixFormat::from_path(path) {
        MatrixFormat::Binary => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(&header(DTYPE_REAL, m.nrows(), m.ncols()))?;
            for v in m.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
            w.flush()?;
        }
        MatrixFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(path)?;
            for row in m.row_iter() {
                w.write_record(row.iter().map(|v| format!("{v:e}")))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Read a real matrix; the format follows the file extension (`.csv` or
/// binary otherwise).
pub fn read_matrix(path: &Path) -> Result<RealMatrix> {
    match MatrixFormat::from_path(path) {
        MatrixFormat::Binary => {
            let bytes = read_all(path)?;
            let (dtype, rows, cols, payload) = parse(&bytes, path)?;
            if dtype != DTYPE_REAL {
                return Err(Error::Format(format!(
                    "{}: expected a real matrix",
                    path.display()
                )));
            }
            let data: Vec<f64> = (0..rows * cols).map(|i| f64_at(payload, i)).collect();
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(non_finite(path, i, rows));
            }
            Ok(RealMatrix::from_vec(rows, cols, data))
        }
        MatrixFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .from_path(path)?;
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for (i, record) in reader.records().enumerate() {
                let record = record?;
                let mut row = Vec::with_capacity(record.len());
                for (j, cell) in record.iter().enumerate() {
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::Format(format!(
                            "{}: row {i}, column {j}: '{cell}' is not a number",
                            path.display()
                        ))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            context: path.display().to_string(),
                            row: i,
                            col: j,
                        });
                    }
                    row.push(v);
                }
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(Error::Format(format!(
                            "{}: row {i} has {} columns, expected {}",
                            path.display(),
                            row.len(),
                            first.len()
                        )));
                    }
                }
                rows.push(row);
            }
            if rows.is_empty() || rows[0].is_empty() {
                return Err(Error::Format(format!("{}: empty matrix", path.display())));
            }
            let (r, c) = (rows.len(), rows[0].len());
            Ok(RealMatrix::from_fn(r, c, |i, j| rows[i][j]))
        }
    }
}

pub fn write_complex_matrix(path: &Path, m: &ComplexMatrix) -> Result<()> {
    if MatrixFormat::from_path(path) == MatrixFormat::Csv {
        return Err(Error::InvalidArgument(
            "complex matrices are stored in the binary format only".into(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&header(DTYPE_COMPLEX, m.nrows(), m.ncols()))?;
    for z in m.iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_complex_matrix(path: &Path) -> Result<ComplexMatrix> {
    let bytes = read_all(path)?;
    let (dtype, rows, cols, payload) = parse(&bytes, path)?;
    let data: Vec<Complex64> = match dtype {
        DTYPE_COMPLEX => (0..rows * cols)
            .map(|i| Complex64::new(f64_at(payload, 2 * i), f64_at(payload, 2 * i + 1)))
            .collect(),
        _ => (0..rows * cols)
            .map(|i| Complex64::new(f64_at(payload, i), 0.0))
            .collect(),
    };
    if let Some(i) = data
        .iter()
        .position(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        return Err(non_finite(path, i, rows));
    }
    Ok(ComplexMatrix::from_vec(rows, cols, data))
}

/// Sidecar `snapshots.json` describing a saved [`SnapshotSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub dt: f64,
    pub n: usize,
    pub m: usize,
    pub q: usize,
    pub format: MatrixFormat,
}

fn file(dir: &Path, stem: &str, format: MatrixFormat) -> PathBuf {
    dir.join(format!("{stem}.{}", format.extension()))
}

/// Write `x`, `x_shifted`, optional `inputs` and `snapshots.json` into `dir`.
pub fn save_snapshots(set: &SnapshotSet, dir: &Path, format: MatrixFormat) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix(&file(dir, "x", format), &set.x)?;
    write_matrix(&file(dir, "x_shifted", format), &set.x_shifted)?;
    if let Some(u) = &set.inputs {
        write_matrix(&file(dir, "inputs", format), u)?;
    }
    let manifest = SnapshotManifest {
        dt: set.dt,
        n: set.n(),
        m: set.m(),
        q: set.q(),
        format,
    };
    fs::write(
        dir.join("snapshots.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn read_snapshot_manifest(dir: &Path) -> Result<SnapshotManifest> {
    Ok(serde_json::from_str(&fs::read_to_string(
        dir.join("snapshots.json"),
    )?)?)
}

pub fn load_snapshots(dir: &Path, format: MatrixFormat) -> Result<SnapshotSet> {
    let manifest = read_snapshot_manifest(dir)?;
    let x = read_matrix(&file(dir, "x", format))?;
    let xp = read_matrix(&file(dir, "x_shifted", format))?;
    let inputs_path = file(dir, "inputs", format);
    let inputs = if manifest.q > 0 {
        Some(read_matrix(&inputs_path)?)
    } else {
        None
    };
    if x.nrows() != manifest.n || x.ncols() != manifest.m {
        return Err(Error::dims(
            "snapshot file X vs manifest",
            format!("{}×{}", manifest.n, manifest.m),
            format!("{}×{}", x.nrows(), x.ncols()),
        ));
    }
    if let Some(u) = &inputs {
        if u.nrows() != manifest.q {
            return Err(Error::dims(
                "input file Υ vs manifest (rows)",
                manifest.q,
                u.nrows(),
            ));
        }
    }
    SnapshotSet::new(x, xp, inputs, manifest.dt)
}
