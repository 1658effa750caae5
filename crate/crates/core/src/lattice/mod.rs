//! Real-space and Bloch Hamiltonians of SSH-type chains, plus the disorder
//! and loss modifications applied to them.

mod chain;
mod disorder;
mod loss;

pub use chain::{Bond, BondKind, ChainSpec, Region, SiteLabel, Sublattice, Topology};
pub use disorder::{apply_disorder, DisorderKind, DisorderRealization, DisorderSymmetry, Granularity};
pub use loss::{apply_loss, LossModel};

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Instantaneous couplings and onsite energies, with their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingPoint {
    pub j1: f64,
    pub j2: f64,
    pub va: f64,
    pub vb: f64,
    pub dj1_dt: f64,
    pub dj2_dt: f64,
    pub dva_dt: f64,
    pub dvb_dt: f64,
}

impl CouplingPoint {
    /// Static point (all derivatives zero).
    pub fn new(j1: f64, j2: f64, va: f64, vb: f64) -> Self {
        Self {
            j1,
            j2,
            va,
            vb,
            ..Self::default()
        }
    }

    /// Rice-Mele point with `Vb = -Va`.
    pub fn rice_mele(j1: f64, j2: f64, va: f64) -> Self {
        Self::new(j1, j2, va, -va)
    }

    /// Plain SSH point without onsite energies.
    pub fn ssh(j1: f64, j2: f64) -> Self {
        Self::new(j1, j2, 0.0, 0.0)
    }

    /// The time derivatives packed as a coupling point, so that `dH/dt` is
    /// assembled by the same builders as `H`.
    pub fn derivative(&self) -> Self {
        Self::new(self.dj1_dt, self.dj2_dt, self.dva_dt, self.dvb_dt)
    }

    pub fn is_finite(&self) -> bool {
        [self.j1, self.j2, self.va, self.vb].iter().all(|x| x.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(invalid("coupling", format!("non-finite coupling point {self:?}")));
        }
        if self.j1 < 0.0 || self.j2 < 0.0 {
            return Err(invalid(
                "coupling",
                format!("J1 and J2 must be non-negative (J1 = {}, J2 = {})", self.j1, self.j2),
            ));
        }
        Ok(())
    }

    fn hopping(&self, kind: BondKind) -> f64 {
        match kind {
            BondKind::Intra => self.j1,
            BondKind::Inter => self.j2,
        }
    }

    fn onsite(&self, sublattice: Sublattice) -> f64 {
        match sublattice {
            Sublattice::A => self.va,
            Sublattice::B => self.vb,
        }
    }
}

/// Per-site onsite energies and per-bond hopping amplitudes of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteCouplings {
    pub onsite: Vec<f64>,
    pub hopping: Vec<f64>,
}

impl SiteCouplings {
    /// Uniform couplings from a single point, no disorder.
    pub fn uniform(spec: &ChainSpec, c: &CouplingPoint) -> Self {
        Self {
            onsite: (0..spec.len()).map(|s| c.onsite(spec.sublattice(s))).collect(),
            hopping: spec.bonds().iter().map(|b| c.hopping(b.kind)).collect(),
        }
    }

    /// Validated couplings at `c`, with optional disorder factors.
    pub fn at(spec: &ChainSpec, c: &CouplingPoint, disorder: Option<&DisorderRealization>) -> Result<Self> {
        c.validate()?;
        Self::at_unchecked(spec, c, disorder)
    }

    /// Like [`SiteCouplings::at`] without the sign check, for derivative
    /// points whose entries may be negative.
    pub fn at_unchecked(
        spec: &ChainSpec,
        c: &CouplingPoint,
        disorder: Option<&DisorderRealization>,
    ) -> Result<Self> {
        let mut table = Self::uniform(spec, c);
        if let Some(r) = disorder {
            r.check(spec)?;
            disorder::scale(&mut table, r);
        }
        Ok(table)
    }
}

/// Dense square complex Hamiltonian in the site basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    entries: DMatrix<Complex64>,
    hermitian: bool,
}

/// Entrywise tolerance for the Hermitian flag.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

impl HamiltonianMatrix {
    /// Wrap a square matrix; the Hermitian flag is computed from the entries.
    pub fn from_entries(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                what: "square Hamiltonian",
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        let hermitian = is_hermitian(&entries, HERMITIAN_TOLERANCE);
        Ok(Self { entries, hermitian })
    }

    /// Assemble from per-site and per-bond tables.
    pub fn from_couplings(spec: &ChainSpec, couplings: &SiteCouplings) -> Result<Self> {
        check_table(spec, couplings)?;
        let len = spec.len();
        let mut m = DMatrix::<Complex64>::zeros(len, len);
        for (s, &e) in couplings.onsite.iter().enumerate() {
            m[(s, s)] = Complex64::new(e, 0.0);
        }
        for (bond, &j) in spec.bonds().iter().zip(&couplings.hopping) {
            let (i, k) = bond.sites;
            m[(i, k)] += Complex64::new(j, 0.0);
            m[(k, i)] += Complex64::new(j, 0.0);
        }
        Ok(Self {
            entries: m,
            hermitian: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.entries;
        let n = m.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

fn is_hermitian(m: &DMatrix<Complex64>, tol: f64) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (i..n).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol))
}

fn check_table(spec: &ChainSpec, couplings: &SiteCouplings) -> Result<()> {
    if couplings.onsite.len() != spec.len() {
        return Err(Error::DimensionMismatch {
            what: "onsite energies",
            expected: spec.len(),
            actual: couplings.onsite.len(),
        });
    }
    if couplings.hopping.len() != spec.bonds().len() {
        return Err(Error::DimensionMismatch {
            what: "bond couplings",
            expected: spec.bonds().len(),
            actual: couplings.hopping.len(),
        });
    }
    Ok(())
}

fn require(spec: &ChainSpec, allowed: &[Topology], expected: &'static str) -> Result<()> {
    if allowed.contains(&spec.topology()) {
        Ok(())
    } else {
        Err(Error::WrongTopology {
            expected,
            actual: spec.topology().name(),
        })
    }
}

/// Tridiagonal SSH chain: diagonal `Va, Vb, Va, ...`, off-diagonal
/// `J1, J2, J1, ...`.
pub fn build_ssh_hamiltonian(spec: &ChainSpec, c: &CouplingPoint) -> Result<HamiltonianMatrix> {
    require(spec, &[Topology::EvenSsh, Topology::OddSsh], "even-ssh or odd-ssh")?;
    c.validate()?;
    HamiltonianMatrix::from_couplings(spec, &SiteCouplings::uniform(spec, c))
}

/// Mirror-symmetric chain of `2N + 1` sites with the interface at the center.
pub fn build_interface_hamiltonian(
    spec: &ChainSpec,
    c: &CouplingPoint,
) -> Result<HamiltonianMatrix> {
    require(spec, &[Topology::Interface], "interface")?;
    c.validate()?;
    HamiltonianMatrix::from_couplings(spec, &SiteCouplings::uniform(spec, c))
}

/// Star of `K` even chains sharing an a-type hub.
pub fn build_router_hamiltonian(spec: &ChainSpec, c: &CouplingPoint) -> Result<HamiltonianMatrix> {
    require(spec, &[Topology::Router], "router")?;
    c.validate()?;
    HamiltonianMatrix::from_couplings(spec, &SiteCouplings::uniform(spec, c))
}

/// Dispatch to the builder matching the chain's topology.
pub fn build_hamiltonian(spec: &ChainSpec, c: &CouplingPoint) -> Result<HamiltonianMatrix> {
    match spec.topology() {
        Topology::EvenSsh | Topology::OddSsh => build_ssh_hamiltonian(spec, c),
        Topology::Interface => build_interface_hamiltonian(spec, c),
        Topology::Router => build_router_hamiltonian(spec, c),
    }
}

/// Two-band Bloch Hamiltonian in the `(a_k, b_k)` basis.
pub fn build_bloch_hamiltonian(k: f64, c: &CouplingPoint) -> Matrix2<Complex64> {
    let off = Complex64::new(c.j1, 0.0) + Complex64::from_polar(c.j2, -k);
    Matrix2::new(
        Complex64::new(c.va, 0.0),
        off,
        off.conj(),
        Complex64::new(c.vb, 0.0),
    )
}
