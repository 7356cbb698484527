//! Result tables, their CSV rendering and the on-disk output layout.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ModelConfig;

/// Version stamped into every JSON summary.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
    Flag(bool),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Int(v) => write!(out, "{v}").unwrap(),
            // Display gives the shortest string that round-trips
            Cell::Real(v) => write!(out, "{v}").unwrap(),
            Cell::Text(s) => out.push_str(s),
            Cell::Flag(b) => out.push_str(if *b { "true" } else { "false" }),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Real(v) => Some(v),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: &'static str,
    pub description: &'static str,
}

pub const fn col(name: &'static str, description: &'static str) -> Column {
    Column { name, description }
}

/// Output of one experiment command.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub command: &'static str,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Free-form remarks carried into the JSON summary.
    pub notes: Vec<String>,
    /// Command-specific summary values for the JSON summary.
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Table {
    pub fn new(command: &'static str, columns: Vec<Column>) -> Self {
        Table {
            command,
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
            extra: serde_json::Map::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the column count"
        );
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Numeric column values; non-numeric cells become NaN.
    pub fn numeric_column(&self, name: &str) -> Vec<f64> {
        let i = self
            .column_index(name)
            .unwrap_or_else(|| panic!("no column {name}"));
        self.rows
            .iter()
            .map(|r| r[i].as_f64().unwrap_or(f64::NAN))
            .collect()
    }

    pub fn text_column(&self, name: &str) -> Vec<String> {
        let i = self
            .column_index(name)
            .unwrap_or_else(|| panic!("no column {name}"));
        self.rows
            .iter()
            .map(|r| {
                let mut s = String::new();
                r[i].render(&mut s);
                s
            })
            .collect()
    }

    /// CSV text: a `#` comment describing every column, the header row,
    /// then one line per row ending in the config hash. LF endings.
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut out = String::new();
        out.push_str("# ");
        let described: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{}: {}", c.name, c.description))
            .collect();
        out.push_str(&described.join("; "));
        out.push('\n');
        for c in &self.columns {
            out.push_str(c.name);
            out.push(',');
        }
        out.push_str("config_hash\n");
        for row in &self.rows {
            for cell in row {
                cell.render(&mut out);
                out.push(',');
            }
            out.push_str(config_hash);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub artifact_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub config_hash: String,
    pub master_seed: u64,
    pub seed_defaulted: bool,
    pub workers: usize,
    pub noise_convention: String,
    pub noise_variance_per_clone: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub provenance: Provenance,
    /// Canonical config text, one `key = value` per line.
    pub config: String,
    pub csv: String,
    pub columns: Vec<Column>,
    pub rows: usize,
    pub notes: Vec<String>,
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Summary {
    pub fn new(table: &Table, cfg: &ModelConfig, workers: usize) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Summary {
            provenance: Provenance {
                command: table.command.to_owned(),
                artifact_version: ARTIFACT_VERSION.to_owned(),
                timestamp,
                config_hash: cfg.hash(),
                master_seed: cfg.master_seed,
                seed_defaulted: cfg.seed_defaulted,
                workers,
                noise_convention: cfg.noise_convention.as_str().to_owned(),
                noise_variance_per_clone: cfg.noise_variance(),
            },
            config: cfg.canonical_text(),
            csv: csv_name(table.command),
            columns: table.columns.clone(),
            rows: table.rows.len(),
            notes: table.notes.clone(),
            extra: table.extra.clone(),
        }
    }
}

pub fn csv_name(command: &str) -> String {
    format!("{command}.csv")
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    std::fs::rename(&tmp, path)
}

/// Writes `<out>/<hash>/{config.txt, <command>.csv, <command>.summary.json}`
/// and returns the run directory.
pub fn write_run(
    out: &Path,
    table: &Table,
    cfg: &ModelConfig,
    workers: usize,
) -> std::io::Result<PathBuf> {
    let hash = cfg.hash();
    let dir = out.join(&hash);
    std::fs::create_dir_all(&dir)?;
    write_atomic(&dir.join("config.txt"), cfg.canonical_text().as_bytes())?;
    write_atomic(
        &dir.join(csv_name(table.command)),
        table.to_csv(&hash).as_bytes(),
    )?;
    let summary = Summary::new(table, cfg, workers);
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_atomic(
        &dir.join(format!("{}.summary.json", table.command)),
        json.as_bytes(),
    )?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new("demo", vec![col("k", "dimension"), col("v", "value")]);
        t.push(vec![1usize.into(), 0.1f64.into()]);
        t.push(vec![2usize.into(), Cell::Text("IP".into())]);
        assert_eq!(
            t.to_csv("abc"),
            "# k: dimension; v: value\nk,v,config_hash\n1,0.1,abc\n2,IP,abc\n"
        );
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
