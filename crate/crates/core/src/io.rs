//! CSV tables and file digests.

use std::path::Path;

use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.display().to_string(), source }
}

/// A header plus rows of already formatted cells. Floats are written with
/// Rust's shortest round-trip `Display`, which is locale independent.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(f64::to_string).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// Comma-separated, header first, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r.get(i).and_then(|c| c.parse().ok())).collect()
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        Ok(Self { header, rows })
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Columns of a data file for fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct XyData {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub sigmas: Option<Vec<f64>>,
}

/// Reads `x`, `y` and an optional `sigma` column. Without `x`/`y` headers the
/// first two columns are used.
pub fn parse_xy_csv(text: &str, path: &str) -> Result<XyData, IoError> {
    let bad = |message: String| IoError::Csv { path: path.to_string(), message };
    let table = Table::from_csv(text).map_err(bad)?;
    if table.header.len() < 2 {
        return Err(bad("need at least two columns".into()));
    }
    let find = |n: &str| table.header.iter().position(|h| h == n);
    let (ix, iy) = match (find("x"), find("y")) {
        (Some(x), Some(y)) => (x, y),
        _ => (0, 1),
    };
    let is = find("sigma");
    let cell = |row: usize, col: usize| -> Result<f64, IoError> {
        let raw = table.rows[row].get(col).ok_or_else(|| bad(format!("row {} is short", row + 2)))?;
        raw.parse::<f64>().map_err(|_| bad(format!("row {}: `{raw}` is not a number", row + 2)))
    };
    let n = table.rows.len();
    let mut data = XyData { xs: Vec::with_capacity(n), ys: Vec::with_capacity(n), sigmas: is.map(|_| Vec::with_capacity(n)) };
    for r in 0..n {
        data.xs.push(cell(r, ix)?);
        data.ys.push(cell(r, iy)?);
        if let (Some(i), Some(s)) = (is, data.sigmas.as_mut()) {
            s.push(cell(r, i)?);
        }
    }
    Ok(data)
}
