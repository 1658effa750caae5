//! Run configuration: TOML file, `--set` overrides, validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use topopump::lattice::Granularity;
use topopump::{ChainSpec, DisorderKind, DisorderSymmetry, DriveSchedule, Protocol, Topology, VbProfile};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub router: RouterConfig,
}

fn default_seed() -> u64 {
    2024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Required whenever a `[chain]` table is given.
    pub topology: Topology,
    /// Cells per half (even/odd SSH, interface) or sites per branch (router).
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_branches")]
    pub branches: usize,
}

fn default_n() -> usize {
    10
}

fn default_branches() -> usize {
    4
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            topology: Topology::Interface,
            n: 10,
            branches: default_branches(),
        }
    }
}

impl ChainConfig {
    pub fn spec(&self) -> Result<ChainSpec, CliError> {
        let spec = match self.topology {
            Topology::EvenSsh => ChainSpec::even_ssh(self.n),
            Topology::OddSsh => ChainSpec::odd_ssh(self.n),
            Topology::Interface => ChainSpec::interface(self.n),
            Topology::Router => ChainSpec::router(self.branches, self.n),
        };
        spec.map_err(|e| CliError::Config(format!("chain: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Cosine,
    Exponential,
    ThreeStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    pub alpha: Option<f64>,
    pub vb: VbProfile,
    pub t_op: Option<f64>,
    pub j1_0: Option<f64>,
    pub j2_0: Option<f64>,
    pub t_star: f64,
    pub j0: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            kind: ProtocolKind::Exponential,
            alpha: Some(3.2),
            vb: VbProfile::AsPrinted,
            t_op: None,
            j1_0: None,
            j2_0: None,
            t_star: 100.0,
            j0: 1.0,
        }
    }
}

impl ProtocolConfig {
    pub fn protocol(&self) -> Result<Protocol, CliError> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::Config(format!("protocol.{name} is required for kind = {:?}", self.kind)))
        };
        Ok(match self.kind {
            ProtocolKind::Cosine => Protocol::Cosine,
            ProtocolKind::Exponential => Protocol::Exponential {
                alpha: need(self.alpha, "alpha")?,
                vb: self.vb,
            },
            ProtocolKind::ThreeStep => Protocol::ThreeStep {
                t_op: need(self.t_op, "t_op")?,
                j1_0: self.j1_0.unwrap_or(self.j0),
                j2_0: self.j2_0.unwrap_or(0.0),
            },
        })
    }

    pub fn schedule(&self) -> Result<DriveSchedule, CliError> {
        self.schedule_at(self.t_star)
    }

    pub fn schedule_at(&self, t_star: f64) -> Result<DriveSchedule, CliError> {
        let protocol = self.protocol()?;
        let j0 = match protocol {
            Protocol::ThreeStep { j1_0, .. } => j1_0,
            _ => self.j0,
        };
        DriveSchedule::new(protocol, j0, t_star).map_err(|e| CliError::Config(format!("protocol: {e}")))
    }
}

/// Either an explicit list or an inclusive uniform range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridSpec {
    pub fn values(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let v = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range { start, stop, step } => {
                if !(*step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(CliError::Config(format!(
                        "{name}: need finite start <= stop and step > 0"
                    )));
                }
                topopump::experiments::uniform_grid(*start, *stop, *step)
            }
        };
        if v.is_empty() {
            return Err(CliError::Config(format!("{name}: grid is empty")));
        }
        if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(format!("{name}: grid must be finite and strictly increasing")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub dt: Option<f64>,
    pub n_k: usize,
    pub frames: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: None,
            n_k: 4096,
            frames: topopump::dynamics::DEFAULT_FRAMES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// `J1` values for the static spectrum (`J2 = j2`, no onsite energies).
    pub j1: GridSpec,
    pub j2: f64,
    /// Number of times in `[0, t*]` for the instantaneous spectrum.
    pub time_samples: usize,
    /// Alphas for the minimum-gap table.
    pub alphas: GridSpec,
    /// `(J1, J2)` pairs for dispersion, d-vector and winding tables.
    pub bloch_points: Vec<[f64; 2]>,
    pub k_samples: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            j1: GridSpec::Range {
                start: 0.0,
                stop: 2.0,
                step: 0.01,
            },
            j2: 1.0,
            time_samples: 201,
            alphas: GridSpec::List(vec![2.0, 4.0, 6.0, 8.0, 10.0]),
            bloch_points: vec![[1.0, 0.6], [1.0, 1.0], [0.6, 1.0]],
            k_samples: 201,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    Fidelity,
    PhaseDiagram,
    OptimalAlpha,
    Scalability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: SweepMode,
    pub t_star: GridSpec,
    pub alpha: GridSpec,
    pub theta: f64,
    /// Interface-chain `N` values for the scalability sweep.
    pub sizes: Vec<usize>,
    /// Scalability `t*` grid as `[low, high]` multiples of the per-size
    /// budget, with `scale_points` points.
    pub scale_span: [f64; 2],
    pub scale_points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mode: SweepMode::Fidelity,
            t_star: GridSpec::Range {
                start: 5.0,
                stop: 300.0,
                step: 5.0,
            },
            alpha: GridSpec::List(vec![3.2]),
            theta: 0.99,
            sizes: vec![10, 16, 22, 28],
            scale_span: [0.5, 1.6],
            scale_points: 45,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleMode {
    Disorder,
    Loss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Uniform,
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub mode: EnsembleMode,
    pub kind: DisorderKind,
    pub symmetry: DisorderSymmetry,
    pub granularity: Granularity,
    pub strengths: Vec<f64>,
    pub m: usize,
    pub gammas: Vec<f64>,
    pub loss: LossKind,
    /// Draws of the asymmetric loss offsets per rate.
    pub samples: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            mode: EnsembleMode::Disorder,
            kind: DisorderKind::Diagonal,
            symmetry: DisorderSymmetry::MirrorSymmetric,
            granularity: Granularity::Global,
            strengths: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            m: 100,
            gammas: vec![0.0, 1e-5, 2.5e-5, 5e-5, 1e-4],
            loss: LossKind::Uniform,
            samples: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// CSV table to fit; `#` lines are skipped.
    pub input: Option<PathBuf>,
    pub x: String,
    pub y: String,
    /// x values excluded from the fit and reported as predictions.
    pub holdout: Vec<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            input: None,
            x: "len".into(),
            y: "t_star_stable".into(),
            holdout: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    /// Branch counts for the stabilization-time table.
    pub branches: Vec<usize>,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            branches: vec![2, 3, 4, 5, 6],
        }
    }
}

impl RunConfig {
    /// Read `path` (if any), apply `key=value` overrides, deserialize and
    /// validate.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        if !table.contains_key("chain") {
            let chain = toml::Value::try_from(ChainConfig::default()).expect("chain serializes");
            table.insert("chain".into(), chain);
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let Some(s) = seed {
            cfg.master_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.chain.spec()?;
        self.protocol.schedule()?;
        self.spectrum.j1.values("spectrum.j1")?;
        self.spectrum.alphas.values("spectrum.alphas")?;
        self.sweep.t_star.values("sweep.t_star")?;
        self.sweep.alpha.values("sweep.alpha")?;
        if !(self.sweep.theta > 0.0 && self.sweep.theta <= 1.0) {
            return Err(CliError::Config("sweep.theta must be in (0, 1]".into()));
        }
        if self.ensemble.m == 0 {
            return Err(CliError::Config("ensemble.m must be >= 1".into()));
        }
        if self.ensemble.strengths.iter().any(|w| !(*w >= 0.0)) {
            return Err(CliError::Config("ensemble.strengths must be >= 0".into()));
        }
        if self.ensemble.gammas.iter().any(|g| !(*g >= 0.0)) {
            return Err(CliError::Config("ensemble.gammas must be >= 0".into()));
        }
        if self.spectrum.time_samples < 2 || self.spectrum.k_samples < 2 {
            return Err(CliError::Config("spectrum.time_samples and k_samples must be >= 2".into()));
        }
        if self.sweep.scale_points < 2 || !(self.sweep.scale_span[0] > 0.0 && self.sweep.scale_span[1] > self.sweep.scale_span[0]) {
            return Err(CliError::Config("sweep.scale_span must be increasing and positive, scale_points >= 2".into()));
        }
        if let Some(dt) = self.numerics.dt {
            if !(dt > 0.0) {
                return Err(CliError::Config("numerics.dt must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `a.b.c=value`: `value` is parsed as a TOML value, falling back to a bare
/// string.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{assignment}`")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("--set: malformed key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set: `{p}` in `{key}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
