use serde::{Deserialize, Serialize};

use super::{ChainSpec, CouplingPoint, SiteCouplings};
use crate::error::{invalid, Error, Result};

/// Diagonal disorder perturbs onsite energies, off-diagonal disorder the
/// hopping amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderKind {
    Diagonal,
    OffDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderSymmetry {
    /// Identical factors at mirror-image positions.
    MirrorSymmetric,
    /// One factor per half-chain (per branch for routers), applied to the
    /// intercell bonds or the b-sites only.
    Asymmetric,
}

/// How many independent values a mirror-symmetric realization draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    /// One value per coupling type (`J1`/`J2` or `Va`/`Vb`) for the whole
    /// chain.
    #[default]
    Global,
    /// One value per mirror class of sites/bonds.
    PerSite,
}

/// One frozen draw of multiplicative factors `1 + delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub kind: DisorderKind,
    pub symmetry: DisorderSymmetry,
    pub strength: f64,
    pub site_factors: Vec<f64>,
    pub bond_factors: Vec<f64>,
    pub seed: u64,
}

impl DisorderRealization {
    /// All factors exactly one.
    pub fn identity(spec: &ChainSpec, kind: DisorderKind, symmetry: DisorderSymmetry) -> Self {
        Self {
            kind,
            symmetry,
            strength: 0.0,
            site_factors: vec![1.0; spec.len()],
            bond_factors: vec![1.0; spec.bonds().len()],
            seed: 0,
        }
    }

    /// The `delta` values, `factor - 1`, for every site and bond.
    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.site_factors
            .iter()
            .chain(&self.bond_factors)
            .map(|f| f - 1.0)
    }

    pub fn check(&self, spec: &ChainSpec) -> Result<()> {
        if self.site_factors.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                what: "disorder site factors",
                expected: spec.len(),
                actual: self.site_factors.len(),
            });
        }
        if self.bond_factors.len() != spec.bonds().len() {
            return Err(Error::DimensionMismatch {
                what: "disorder bond factors",
                expected: spec.bonds().len(),
                actual: self.bond_factors.len(),
            });
        }
        let bound = self.strength * (1.0 + 1e-12);
        if let Some(d) = self.deltas().find(|d| !(d.abs() <= bound)) {
            return Err(invalid(
                "disorder",
                format!("factor offset {d} outside [-{0}, {0}]", self.strength),
            ));
        }
        Ok(())
    }
}

/// Per-bond couplings and per-site energies with the realization's factors
/// applied.
pub fn apply_disorder(
    spec: &ChainSpec,
    c: &CouplingPoint,
    r: &DisorderRealization,
) -> Result<SiteCouplings> {
    r.check(spec)?;
    let mut table = SiteCouplings::uniform(spec, c);
    scale(&mut table, r);
    Ok(table)
}

pub(crate) fn scale(table: &mut SiteCouplings, r: &DisorderRealization) {
    for (e, f) in table.onsite.iter_mut().zip(&r.site_factors) {
        *e *= f;
    }
    for (j, f) in table.hopping.iter_mut().zip(&r.bond_factors) {
        *j *= f;
    }
}
