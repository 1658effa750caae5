use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ChainSpec, HamiltonianMatrix, Region, Sublattice};
use crate::error::{invalid, Error, Result};

/// Per-site loss rates entering `H' = H - i diag(gamma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    /// Base rate `gamma` in units of `J0`.
    pub gamma: f64,
    /// Relative b-site offsets per half-chain (per branch for routers); empty
    /// for symmetric loss.
    pub deltas: Vec<f64>,
    rates: Vec<f64>,
}

impl LossModel {
    /// The same rate on every site.
    pub fn uniform(spec: &ChainSpec, gamma: f64) -> Result<Self> {
        check_rate(gamma)?;
        Ok(Self {
            gamma,
            deltas: Vec::new(),
            rates: vec![gamma; spec.len()],
        })
    }

    /// a-sites decay at `gamma`; b-sites in region `r` decay at
    /// `gamma (1 + deltas[r])`.
    pub fn asymmetric(spec: &ChainSpec, gamma: f64, deltas: &[f64]) -> Result<Self> {
        check_rate(gamma)?;
        if deltas.len() != spec.region_count() {
            return Err(Error::DimensionMismatch {
                what: "loss asymmetry offsets",
                expected: spec.region_count(),
                actual: deltas.len(),
            });
        }
        if let Some(d) = deltas.iter().find(|d| !(d.abs() <= 0.1)) {
            return Err(invalid("loss.delta", format!("offset {d} outside [-0.1, 0.1]")));
        }
        let rates = (0..spec.len())
            .map(|s| match (spec.sublattice(s), spec.site_region(s)) {
                (Sublattice::B, Region::Branch(r)) => gamma * (1.0 + deltas[r]),
                _ => gamma,
            })
            .collect();
        Ok(Self {
            gamma,
            deltas: deltas.to_vec(),
            rates,
        })
    }

    /// Arbitrary non-negative per-site rates.
    pub fn from_rates(rates: Vec<f64>) -> Result<Self> {
        for &r in &rates {
            check_rate(r)?;
        }
        let gamma = rates.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            gamma,
            deltas: Vec::new(),
            rates,
        })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn is_lossless(&self) -> bool {
        self.rates.iter().all(|&r| r == 0.0)
    }
}

fn check_rate(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(invalid("loss.gamma", format!("rate must be finite and >= 0, got {gamma}")))
    }
}

/// `H' = H - i diag(gamma)`.
pub fn apply_loss(h: &HamiltonianMatrix, loss: &LossModel) -> Result<HamiltonianMatrix> {
    if !h.is_hermitian() {
        return Err(invalid("hamiltonian", "loss must be applied to a Hermitian Hamiltonian"));
    }
    if loss.rates.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            what: "loss rates",
            expected: h.dim(),
            actual: loss.rates.len(),
        });
    }
    let mut m = h.entries().clone();
    for (s, &g) in loss.rates.iter().enumerate() {
        m[(s, s)] -= Complex64::new(0.0, g);
    }
    HamiltonianMatrix::from_entries(m)
}
