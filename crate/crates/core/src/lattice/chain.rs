use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chain geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// `2N` sites, bonds `J1, J2, ..., J1`.
    EvenSsh,
    /// `2N + 1` sites, bonds `J1, J2, ..., J2`; last site is a-type.
    OddSsh,
    /// Two mirror-image even chains sharing one central a-type site.
    Interface,
    /// `K` identical even chains joined at one shared a-type hub.
    Router,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::EvenSsh => "even-ssh",
            Topology::OddSsh => "odd-ssh",
            Topology::Interface => "interface",
            Topology::Router => "router",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

/// Name of one lattice site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteLabel {
    /// `cell` is 1-based and counted from the outer end of `branch`.
    Site {
        branch: usize,
        cell: usize,
        sublattice: Sublattice,
    },
    /// The interface site of the interface chain or the router hub.
    Hub,
}

impl SiteLabel {
    pub fn sublattice(&self) -> Sublattice {
        match self {
            SiteLabel::Site { sublattice, .. } => *sublattice,
            SiteLabel::Hub => Sublattice::A,
        }
    }
}

/// Intracell bonds carry `J1`, intercell bonds carry `J2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondKind {
    Intra,
    Inter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub sites: (usize, usize),
    pub kind: BondKind,
}

/// Which half-chain (or router branch) a site or bond belongs to. Used by the
/// asymmetric disorder and loss models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Branch(usize),
    Center,
}

/// Topology descriptor with its site and bond tables.
///
/// `n` is the chain-size parameter `N`: the number of unit cells for the plain
/// chains (`L = 2N` or `2N + 1`), the total cell count of the interface chain
/// (`L = 2N + 1`, `N` even), and the number of sites per branch for the
/// router (`L = K N + 1`, `N` even).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    topology: Topology,
    n: usize,
    branches: usize,
    sites: Vec<SiteLabel>,
    bonds: Vec<Bond>,
}

impl ChainSpec {
    pub fn even_ssh(cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidChain("even SSH chain needs N >= 1".into()));
        }
        Ok(Self::linear(Topology::EvenSsh, cells, 2 * cells))
    }

    pub fn odd_ssh(cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidChain("odd SSH chain needs N >= 1".into()));
        }
        Ok(Self::linear(Topology::OddSsh, cells, 2 * cells + 1))
    }

    pub fn interface(cells: usize) -> Result<Self> {
        if cells == 0 || !cells.is_multiple_of(2) {
            return Err(Error::InvalidChain(format!(
                "interface chain needs an even, positive N so the interface is an a-type site (got N = {cells})"
            )));
        }
        let len = 2 * cells + 1;
        let half = cells;
        let mut sites = Vec::with_capacity(len);
        for i in 0..len {
            let label = if i == half {
                SiteLabel::Hub
            } else {
                let (branch, depth) = if i < half { (0, i) } else { (1, len - 1 - i) };
                linear_label(branch, depth)
            };
            sites.push(label);
        }
        let bonds = (0..len - 1)
            .map(|i| {
                // Left half runs J1, J2, ... into the interface; the right half
                // is its mirror image.
                let kind = match (i < half, i % 2 == 0) {
                    (true, true) | (false, false) => BondKind::Intra,
                    _ => BondKind::Inter,
                };
                Bond {
                    sites: (i, i + 1),
                    kind,
                }
            })
            .collect();
        Ok(Self {
            topology: Topology::Interface,
            n: cells,
            branches: 2,
            sites,
            bonds,
        })
    }

    /// Star of `branches` even chains with `sites_per_branch` sites each. Sites
    /// are ordered branch by branch from the outer end inward; the hub is last.
    pub fn router(branches: usize, sites_per_branch: usize) -> Result<Self> {
        if branches < 2 {
            return Err(Error::InvalidChain(format!(
                "router needs K >= 2 branches (got K = {branches})"
            )));
        }
        if sites_per_branch == 0 || !sites_per_branch.is_multiple_of(2) {
            return Err(Error::InvalidChain(format!(
                "router branches must be even-sized SSH chains (got N = {sites_per_branch})"
            )));
        }
        let n = sites_per_branch;
        let hub = branches * n;
        let mut sites = Vec::with_capacity(hub + 1);
        let mut bonds = Vec::with_capacity(hub);
        for branch in 0..branches {
            let base = branch * n;
            for depth in 0..n {
                sites.push(linear_label(branch, depth));
                let next = if depth + 1 < n { base + depth + 1 } else { hub };
                let kind = if depth % 2 == 0 {
                    BondKind::Intra
                } else {
                    BondKind::Inter
                };
                bonds.push(Bond {
                    sites: (base + depth, next),
                    kind,
                });
            }
        }
        sites.push(SiteLabel::Hub);
        Ok(Self {
            topology: Topology::Router,
            n,
            branches,
            sites,
            bonds,
        })
    }

    fn linear(topology: Topology, n: usize, len: usize) -> Self {
        let sites = (0..len)
            .map(|i| SiteLabel::Site {
                branch: 0,
                cell: i / 2 + 1,
                sublattice: if i % 2 == 0 { Sublattice::A } else { Sublattice::B },
            })
            .collect();
        let bonds = (0..len - 1)
            .map(|i| Bond {
                sites: (i, i + 1),
                kind: if i % 2 == 0 {
                    BondKind::Intra
                } else {
                    BondKind::Inter
                },
            })
            .collect();
        Self {
            topology,
            n,
            branches: 1,
            sites,
            bonds,
        }
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// The chain-size parameter `N` (see the type-level docs).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    /// Total number of sites `L`.
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[SiteLabel] {
        &self.sites
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn sublattice(&self, site: usize) -> Sublattice {
        self.sites[site].sublattice()
    }

    /// Index of the interface site or router hub.
    pub fn hub(&self) -> Option<usize> {
        match self.topology {
            Topology::Interface => Some(self.n),
            Topology::Router => Some(self.branches * self.n),
            _ => None,
        }
    }

    /// Outer end sites: one per branch for interface/router chains.
    pub fn end_sites(&self) -> Vec<usize> {
        match self.topology {
            Topology::Interface | Topology::EvenSsh | Topology::OddSsh => vec![0, self.len() - 1],
            Topology::Router => (0..self.branches).map(|b| b * self.n).collect(),
        }
    }

    /// Half-chain / branch membership of a site.
    pub fn site_region(&self, site: usize) -> Region {
        let len = self.len();
        match self.topology {
            Topology::Router => {
                if site == len - 1 {
                    Region::Center
                } else {
                    Region::Branch(site / self.n)
                }
            }
            Topology::Interface | Topology::OddSsh => {
                let mid = len / 2;
                match site.cmp(&mid) {
                    std::cmp::Ordering::Less => Region::Branch(0),
                    std::cmp::Ordering::Equal => Region::Center,
                    std::cmp::Ordering::Greater => Region::Branch(1),
                }
            }
            Topology::EvenSsh => Region::Branch(usize::from(site >= len / 2)),
        }
    }

    /// A bond belongs to the region of its non-central endpoint; bonds that
    /// straddle the middle of an even chain belong to the left half.
    pub fn bond_region(&self, bond: usize) -> Region {
        let (i, j) = self.bonds[bond].sites;
        match (self.site_region(i), self.site_region(j)) {
            (Region::Center, r) | (r, Region::Center) => r,
            (r, _) => r,
        }
    }

    /// Number of regions an asymmetric perturbation draws independent values
    /// for.
    pub fn region_count(&self) -> usize {
        match self.topology {
            Topology::Router => self.branches,
            _ => 2,
        }
    }

    /// Site relabeling under the chain's mirror (or branch-permutation)
    /// symmetry: sites in the same class are images of each other.
    pub fn site_mirror_class(&self, site: usize) -> usize {
        let len = self.len();
        match self.topology {
            Topology::Router => {
                if site == len - 1 {
                    self.n
                } else {
                    site % self.n
                }
            }
            _ => site.min(len - 1 - site),
        }
    }

    pub fn bond_mirror_class(&self, bond: usize) -> usize {
        let count = self.bonds.len();
        match self.topology {
            Topology::Router => bond % self.n,
            _ => bond.min(count - 1 - bond),
        }
    }

    pub fn site_class_count(&self) -> usize {
        match self.topology {
            Topology::Router => self.n + 1,
            _ => self.len().div_ceil(2),
        }
    }

    pub fn bond_class_count(&self) -> usize {
        match self.topology {
            Topology::Router => self.n,
            _ => self.bonds.len().div_ceil(2),
        }
    }

    /// Permutation implementing the mirror symmetry: site reversal for linear
    /// chains, cyclic branch shift for the router.
    pub fn mirror_permutation(&self) -> Vec<usize> {
        let len = self.len();
        match self.topology {
            Topology::Router => (0..len)
                .map(|s| {
                    if s == len - 1 {
                        s
                    } else {
                        let branch = (s / self.n + 1) % self.branches;
                        branch * self.n + s % self.n
                    }
                })
                .collect(),
            _ => (0..len).rev().collect(),
        }
    }

    /// Orthonormal basis of the subspace invariant under the chain's
    /// symmetry group, as sparse columns `(site, weight)`.
    ///
    /// Only interface chains and routers have this reduction: the symmetric
    /// sector is one branch plus the hub.
    pub fn symmetric_sector(&self) -> Option<Vec<Vec<(usize, f64)>>> {
        match self.topology {
            Topology::Interface => {
                let len = self.len();
                let w = std::f64::consts::FRAC_1_SQRT_2;
                let mut basis: Vec<Vec<(usize, f64)>> = (0..self.n)
                    .map(|d| vec![(d, w), (len - 1 - d, w)])
                    .collect();
                basis.push(vec![(self.n, 1.0)]);
                Some(basis)
            }
            Topology::Router => {
                let w = 1.0 / (self.branches as f64).sqrt();
                let mut basis: Vec<Vec<(usize, f64)>> = (0..self.n)
                    .map(|d| (0..self.branches).map(|b| (b * self.n + d, w)).collect())
                    .collect();
                basis.push(vec![(self.branches * self.n, 1.0)]);
                Some(basis)
            }
            _ => None,
        }
    }
}

fn linear_label(branch: usize, depth: usize) -> SiteLabel {
    SiteLabel::Site {
        branch,
        cell: depth / 2 + 1,
        sublattice: if depth.is_multiple_of(2) { Sublattice::A } else { Sublattice::B },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(ChainSpec::even_ssh(20).unwrap().len(), 40);
        assert_eq!(ChainSpec::odd_ssh(20).unwrap().len(), 41);
        assert_eq!(ChainSpec::interface(10).unwrap().len(), 21);
        assert_eq!(ChainSpec::router(4, 10).unwrap().len(), 41);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ChainSpec::interface(3).is_err());
        assert!(ChainSpec::router(1, 10).is_err());
        assert!(ChainSpec::router(4, 5).is_err());
        assert!(ChainSpec::even_ssh(0).is_err());
    }

    #[test]
    fn interface_site_is_a_type_hub() {
        let spec = ChainSpec::interface(10).unwrap();
        assert_eq!(spec.hub(), Some(10));
        assert_eq!(spec.sites()[10], SiteLabel::Hub);
        assert_eq!(spec.sublattice(10), Sublattice::A);
        assert_eq!(spec.end_sites(), vec![0, 20]);
    }

    #[test]
    fn interface_bonds_are_mirrored() {
        let spec = ChainSpec::interface(2).unwrap();
        let kinds: Vec<_> = spec.bonds().iter().map(|b| b.kind).collect();
        assert_eq!(
            kinds,
            vec![BondKind::Intra, BondKind::Inter, BondKind::Inter, BondKind::Intra]
        );
    }

    #[test]
    fn router_hub_degree() {
        let spec = ChainSpec::router(4, 10).unwrap();
        let hub = spec.hub().unwrap();
        assert_eq!(hub, 40);
        let degree = spec
            .bonds()
            .iter()
            .filter(|b| b.sites.0 == hub || b.sites.1 == hub)
            .count();
        assert_eq!(degree, 4);
        assert!(spec
            .bonds()
            .iter()
            .filter(|b| b.sites.1 == hub)
            .all(|b| b.kind == BondKind::Inter));
        assert_eq!(spec.end_sites(), vec![0, 10, 20, 30]);
    }

    #[test]
    fn site_labels_are_a_bijection() {
        for spec in [
            ChainSpec::interface(6).unwrap(),
            ChainSpec::router(3, 4).unwrap(),
            ChainSpec::odd_ssh(4).unwrap(),
        ] {
            let mut seen = std::collections::HashSet::new();
            for s in spec.sites() {
                assert!(seen.insert(*s), "duplicate label {s:?}");
            }
            assert_eq!(
                spec.sites().iter().filter(|s| **s == SiteLabel::Hub).count(),
                usize::from(spec.hub().is_some())
            );
        }
    }

    #[test]
    fn mirror_classes_pair_images() {
        let spec = ChainSpec::interface(10).unwrap();
        let perm = spec.mirror_permutation();
        for s in 0..spec.len() {
            assert_eq!(spec.site_mirror_class(s), spec.site_mirror_class(perm[s]));
        }
        let spec = ChainSpec::router(3, 4).unwrap();
        let perm = spec.mirror_permutation();
        for s in 0..spec.len() {
            assert_eq!(spec.site_mirror_class(s), spec.site_mirror_class(perm[s]));
        }
    }

    #[test]
    fn regions() {
        let spec = ChainSpec::interface(4).unwrap();
        assert_eq!(spec.site_region(0), Region::Branch(0));
        assert_eq!(spec.site_region(4), Region::Center);
        assert_eq!(spec.site_region(8), Region::Branch(1));
        // bonds into the interface follow their outer endpoint
        assert_eq!(spec.bond_region(3), Region::Branch(0));
        assert_eq!(spec.bond_region(4), Region::Branch(1));
    }
}
