//! Artifact writing: CSV tables with schema sidecars and a run manifest.
//!
//! Every file is written to a temporary name in the target directory and
//! renamed into place, so a reader never sees a partial artifact.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int,
    Float,
    Bool,
    String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
    /// Empty cells allowed.
    #[serde(default)]
    pub nullable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub file: String,
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Null,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Str(v) => v.clone(),
            Cell::Null => String::new(),
        }
    }

    fn matches(&self, c: &Column) -> bool {
        match (self, c.ty) {
            (Cell::Null, _) => c.nullable,
            (Cell::Int(_), ColumnType::Int) | (Cell::Bool(_), ColumnType::Bool) | (Cell::Str(_), ColumnType::String) => true,
            (Cell::Float(_), ColumnType::Float) => true,
            _ => false,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}

/// A typed table; rows are checked against the columns on insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[(&str, ColumnType)]) -> Self {
        Self {
            columns: columns.iter().map(|&(n, ty)| Column { name: n.to_string(), ty, nullable: false }).collect(),
            rows: Vec::new(),
        }
    }

    pub fn nullable(mut self, name: &str) -> Self {
        for c in &mut self.columns {
            if c.name == name {
                c.nullable = true;
            }
        }
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        for (cell, col) in row.iter().zip(&self.columns) {
            assert!(cell.matches(col), "cell {cell:?} does not fit column {}", col.name);
        }
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str())).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn schema_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().unwrap_or_default().to_os_string();
    name.push(".schema.json");
    csv.with_file_name(name)
}

/// Collects the artifacts of one run in an output directory.
#[derive(Debug)]
pub struct OutputDir {
    pub dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        write_atomic(&p, bytes)?;
        self.written.push(name.to_string());
        Ok(p)
    }

    /// Write `name` and its `name.schema.json` sidecar.
    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        let schema = Schema { file: name.to_string(), columns: table.columns.clone() };
        let json = serde_json::to_string_pretty(&schema).expect("schema serializes");
        let p = self.write_bytes(name, table.to_csv().as_bytes())?;
        let sidecar = schema_path(&p);
        write_atomic(&sidecar, json.as_bytes())?;
        self.written.push(sidecar.file_name().unwrap().to_string_lossy().into_owned());
        Ok(p)
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    pub fn finish(mut self, command: &str, cfg: &RunConfig) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config_sha256: config_hash(cfg),
            files: std::mem::take(&mut self.written),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.path("manifest.json"), json.as_bytes())?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub files: Vec<String>,
}

/// SHA-256 of the compact JSON form of the configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("configuration serializes");
    let digest = Sha256::digest(&bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Check a CSV file against its sidecar schema; returns the number of rows.
pub fn validate_csv(path: &Path) -> Result<usize, CliError> {
    let sidecar = schema_path(path);
    let text = std::fs::read_to_string(&sidecar).map_err(|e| CliError::io(&sidecar, e))?;
    let schema: Schema =
        serde_json::from_str(&text).map_err(|e| CliError::Output(format!("{}: {e}", sidecar.display())))?;
    let bad = |msg: String| CliError::Output(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    let names: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    if header != names {
        return Err(bad(format!("header {header:?} does not match schema {names:?}")));
    }
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        rows += 1;
        for (v, c) in rec.iter().zip(&schema.columns) {
            let ok = if v.is_empty() {
                c.nullable || c.ty == ColumnType::String
            } else {
                match c.ty {
                    ColumnType::Int => v.parse::<i64>().is_ok(),
                    ColumnType::Float => v.parse::<f64>().is_ok(),
                    ColumnType::Bool => v == "true" || v == "false",
                    ColumnType::String => true,
                }
            };
            if !ok {
                return Err(bad(format!("row {rows}: `{v}` is not a valid {:?} for {}", c.ty, c.name)));
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_validate_against_their_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::new(dir.path()).unwrap();
        let mut t = Table::new(&[("a", ColumnType::Int), ("b", ColumnType::Float), ("c", ColumnType::Bool)]).nullable("b");
        t.push(vec![1usize.into(), 0.5.into(), true.into()]);
        t.push(vec![2usize.into(), Cell::Null, false.into()]);
        let p = out.write_table("t.csv", &t).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b,c\n1,0.5,true\n2,,false\n");
        assert_eq!(validate_csv(&p).unwrap(), 2);
        std::fs::write(&p, "a,b,c\nx,0.5,true\n").unwrap();
        assert!(validate_csv(&p).is_err());
        std::fs::write(&p, "a,c,b\n1,true,0.5\n").unwrap();
        assert!(validate_csv(&p).is_err());
    }

    #[test]
    #[should_panic(expected = "does not fit")]
    fn mistyped_cells_are_refused() {
        let mut t = Table::new(&[("a", ColumnType::Int)]);
        t.push(vec![0.5.into()]);
    }
}
