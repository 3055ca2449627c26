use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::hex;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

pub const STAT_HEADER: [&str; 5] = ["stat_name", "value", "target", "tolerance", "pass"];

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn stats() -> Self {
        Self::new(&STAT_HEADER)
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// A `stat_name,value,target,tolerance,pass` row. `pass = None` marks an
    /// informational statistic.
    pub fn stat(&mut self, name: &str, value: impl Into<Cell>, target: Option<f64>, tolerance: Option<f64>, pass: Option<bool>) {
        self.push(vec![
            name.into(),
            value.into(),
            target.into(),
            tolerance.into(),
            pass.map_or(Cell::Text("n/a".into()), Cell::Bool),
        ]);
    }

    /// True when some stat row has `pass = false`.
    pub fn any_failed(&self) -> bool {
        self.header.as_slice() == STAT_HEADER && self.rows.iter().any(|r| r[4] == Cell::Bool(false))
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, HarnessError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_error)?;
        }
        w.into_inner().map_err(|e| HarnessError::Resource(e.to_string()))
    }
}

fn csv_error(e: csv::Error) -> HarnessError {
    HarnessError::Resource(format!("csv: {e}"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| HarnessError::Resource(format!("cannot write {}: {e}", path.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Write a table as CSV; returns the SHA-256 of the bytes written.
pub fn emit_results(table: &Table, path: &Path) -> Result<String, HarnessError> {
    let bytes = table.to_csv()?;
    write_atomic(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub workers: usize,
    pub seed: u64,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub flags_tripped: bool,
    pub summary: serde_json::Value,
    pub results: Vec<ResultFile>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["E", "N_hat", "note"]);
        t.push(vec![0.1.into(), 1.0f64.into(), "a,b".into()]);
        t.push(vec![Cell::Float(-2.5e-300), Cell::Int(3), Cell::Empty]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(
            s,
            "E,N_hat,note\n1.0000000000000001e-1,1.0000000000000000e0,\"a,b\"\n-2.5000000000000000e-300,3,\n"
        );
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-310, -7.25e12] {
            let s = Cell::Float(x).render();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn stat_rows_trip() {
        let mut t = Table::stats();
        t.stat("a", 1.0, Some(1.0), Some(0.1), Some(true));
        t.stat("b", 5usize, None, None, None);
        assert!(!t.any_failed());
        t.stat("c", 2.0, Some(1.0), Some(0.1), Some(false));
        assert!(t.any_failed());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("x.csv");
        write_atomic(&p, b"one\n").unwrap();
        write_atomic(&p, b"two\n").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two\n");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn unwritable_path_is_a_resource_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"").unwrap();
        let err = write_atomic(&blocker.join("x.csv"), b"x").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
