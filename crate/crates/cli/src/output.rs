//! CSV tables with provenance headers, the run manifest and per-point resume
//! markers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    U(u64),
    S(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::F)
    }
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::F(v) if v.is_nan() => out.push_str("NaN"),
            Cell::F(v) if v.is_infinite() => out.push_str(if *v > 0.0 { "inf" } else { "-inf" }),
            Cell::F(v) => write!(out, "{v:.16e}").unwrap(),
            Cell::I(v) => write!(out, "{v}").unwrap(),
            Cell::U(v) => write!(out, "{v}").unwrap(),
            Cell::S(s) => out.push_str(s),
            Cell::Missing => {}
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }
}

/// Everything that goes into the `#` header of each CSV.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.master_seed,
        }
    }
}

pub fn render_csv(table: &Table, prov: &Provenance) -> String {
    let mut s = String::new();
    writeln!(s, "# topopump {}", prov.version).unwrap();
    writeln!(s, "# command: {}", prov.command).unwrap();
    writeln!(s, "# config_sha256: {}", prov.config_hash).unwrap();
    writeln!(s, "# master_seed: {}", prov.seed).unwrap();
    s.push_str(&table.columns.join(","));
    s.push('\n');
    for row in &table.rows {
        for (i, c) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            c.render(&mut s);
        }
        s.push('\n');
    }
    s
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    config_sha256: &'a str,
    master_seed: u64,
    jobs: usize,
    /// Seconds since the Unix epoch. The only non-reproducible field of a run.
    timestamp: u64,
    files: Vec<String>,
    config: &'a RunConfig,
}

/// Output directory of one run.
pub struct RunDir {
    pub root: PathBuf,
    pub prov: Provenance,
    written: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path, prov: Provenance) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            prov,
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, table: &Table) -> Result<PathBuf, CliError> {
        let file = format!("{}.csv", table.name);
        let path = self.root.join(&file);
        write_atomic(&path, &render_csv(table, &self.prov))?;
        self.written.push(file);
        Ok(path)
    }

    pub fn finish(self, cfg: &RunConfig, jobs: usize) -> Result<(), CliError> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = Manifest {
            version: self.prov.version,
            command: &self.prov.command,
            config_sha256: &self.prov.config_hash,
            master_seed: self.prov.seed,
            jobs,
            timestamp,
            files: self.written,
            config: cfg,
        };
        let text = toml::to_string(&manifest).expect("manifest serializes");
        write_atomic(&self.root.join("manifest.toml"), &text)
    }

    /// Marker store for one stage of the run, keyed by the config hash so a
    /// changed config never reuses stale points.
    pub fn points(&self, stage: &str) -> Result<PointStore, CliError> {
        let dir = self
            .root
            .join(".points")
            .join(format!("{stage}-{}", &self.prov.config_hash[..16]));
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(PointStore { dir })
    }
}

/// One file per completed point holding its values as exact bit patterns,
/// so a resumed run reproduces the uninterrupted one byte for byte.
pub struct PointStore {
    dir: PathBuf,
}

impl PointStore {
    fn path(&self, index: usize) -> PathBuf {
        self.dir.join(format!("{index:06}.pt"))
    }

    fn load(&self, index: usize) -> Option<Vec<f64>> {
        let text = fs::read_to_string(self.path(index)).ok()?;
        text.lines()
            .map(|l| u64::from_str_radix(l.trim(), 16).ok().map(f64::from_bits))
            .collect()
    }

    fn store(&self, index: usize, values: &[f64]) -> Result<(), CliError> {
        let mut s = String::new();
        for v in values {
            writeln!(s, "{:016x}", v.to_bits()).unwrap();
        }
        write_atomic(&self.path(index), &s)
    }

    /// Evaluate `f` on `0..n` in parallel, skipping indices with a marker.
    /// Results come back in index order.
    pub fn compute<F>(&self, n: usize, f: F) -> Result<Vec<Vec<f64>>, CliError>
    where
        F: Fn(usize) -> Result<Vec<f64>, CliError> + Sync,
    {
        (0..n)
            .into_par_iter()
            .map(|i| match self.load(i) {
                Some(v) => Ok(v),
                None => {
                    let v = f(i)?;
                    self.store(i, &v)?;
                    Ok(v)
                }
            })
            .collect()
    }
}

/// Encode an optional value for a point marker.
pub fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Decode a marker value written with [`opt`].
pub fn unopt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}
