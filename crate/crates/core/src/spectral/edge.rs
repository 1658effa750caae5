use nalgebra::{DVector as NVec, Matrix2, SymmetricEigen};
use num_complex::Complex64;

use super::{fix_phase, SpectrumSnapshot};
use crate::dynamics::StateVector;
use crate::error::{invalid, Error, Result};
use crate::lattice::{ChainSpec, Sublattice, Topology};

/// Ideal left/right edge states of an even chain and their hybridization.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeStatePair {
    /// Support on a-sites only, amplitudes `1, xi, xi², ...` from the left.
    pub left: StateVector,
    /// Support on b-sites only, mirrored from the right end.
    pub right: StateVector,
    /// `|O_LR|`; the hybridized pair sits at `±hybrid_energy`.
    pub hybrid_energy: f64,
    /// Signed overlap `O_LR = <L|H|R>`.
    pub overlap: f64,
    /// `xi = -J1 / J2`.
    pub localization: f64,
}

impl EdgeStatePair {
    /// `(|L> + |R>) / sqrt 2` and `(|L> - |R>) / sqrt 2`.
    pub fn hybridized(&self) -> (StateVector, StateVector) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let l = self.left.amplitudes();
        let r = self.right.amplitudes();
        let plus = l.iter().zip(r).map(|(a, b)| (a + b) * s).collect::<Vec<_>>();
        let minus = l.iter().zip(r).map(|(a, b)| (a - b) * s).collect::<Vec<_>>();
        (StateVector::from(plus), StateVector::from(minus))
    }
}

/// Semi-infinite edge states of an `N`-cell even chain, projected onto the
/// finite chain, and the two-level hybridization
/// `O_LR = -J2 xi^N (xi² - 1) / (xi^{2N} - 1)`.
///
/// This is the two-state projection: it is exact as `N -> inf` and
/// approximate at small `N` or `J1/J2` near one.
pub fn analytic_edge_states(cells: usize, j1: f64, j2: f64) -> Result<EdgeStatePair> {
    if cells == 0 {
        return Err(Error::InvalidChain("even SSH chain needs N >= 1".into()));
    }
    if !(j2 > 0.0) || !(j1 >= 0.0) {
        return Err(invalid("coupling", format!("need J2 > 0 and J1 >= 0 (J1 = {j1}, J2 = {j2})")));
    }
    if j1 / j2 >= 1.0 {
        return Err(invalid(
            "coupling",
            format!("J1/J2 = {} is not in the nontrivial phase; edge states do not localize", j1 / j2),
        ));
    }
    let xi = -j1 / j2;
    let len = 2 * cells;
    let mut left = vec![0.0; len];
    let mut right = vec![0.0; len];
    let mut p = 1.0;
    for n in 0..cells {
        left[2 * n] = p;
        right[len - 1 - 2 * n] = p;
        p *= xi;
    }
    let xi_n = xi.powi(cells as i32);
    let overlap = -j2 * xi_n * (xi * xi - 1.0) / (xi_n * xi_n - 1.0);
    Ok(EdgeStatePair {
        left: StateVector::from_real(&left).normalized(),
        right: StateVector::from_real(&right).normalized(),
        hybrid_energy: overlap.abs(),
        overlap,
        localization: xi,
    })
}

/// The a-sublattice gap state of an odd, interface or router chain:
/// amplitude `xi^k` on the a-site `k` cells in from an outer end, zero on
/// b-sites, normalized.
///
/// For interface chains and routers the profile is measured from every
/// outer end toward the hub; `J2 = 0` gives the hub (or right-end, for the
/// odd chain) basis vector exactly.
pub fn analytic_gap_state(spec: &ChainSpec, j1: f64, j2: f64) -> Result<StateVector> {
    if j1 < 0.0 || j2 < 0.0 || !j1.is_finite() || !j2.is_finite() {
        return Err(invalid("coupling", format!("need finite J1, J2 >= 0 (J1 = {j1}, J2 = {j2})")));
    }
    let n = spec.n();
    let (power_of, kmax): (Box<dyn Fn(usize) -> Option<usize>>, usize) = match spec.topology() {
        Topology::OddSsh => (Box::new(|s| (s % 2 == 0).then_some(s / 2)), n),
        Topology::Interface => {
            let len = spec.len();
            (
                Box::new(move |s| {
                    let depth = s.min(len - 1 - s);
                    (depth % 2 == 0).then_some(depth / 2)
                }),
                n / 2,
            )
        }
        Topology::Router => {
            let hub = spec.len() - 1;
            (
                Box::new(move |s| {
                    if s == hub {
                        Some(n / 2)
                    } else {
                        let depth = s % n;
                        depth.is_multiple_of(2).then_some(depth / 2)
                    }
                }),
                n / 2,
            )
        }
        Topology::EvenSsh => {
            return Err(Error::WrongTopology {
                expected: "odd-ssh, interface or router",
                actual: spec.topology().name(),
            })
        }
    };
    // For |xi| <= 1 use xi^k; otherwise rescale by xi^-kmax so the largest
    // amplitude is 1 and J2 = 0 needs no division.
    let amp: Box<dyn Fn(usize) -> f64> = if j1 <= j2 {
        let xi = if j2 > 0.0 { -j1 / j2 } else { 0.0 };
        Box::new(move |k| xi.powi(k as i32))
    } else {
        let eta = -j2 / j1;
        Box::new(move |k| eta.powi((kmax - k) as i32))
    };
    let v: Vec<f64> = (0..spec.len())
        .map(|s| match power_of(s) {
            Some(k) if spec.sublattice(s) == Sublattice::A => amp(k),
            _ => 0.0,
        })
        .collect();
    Ok(StateVector::from_real(&v).normalized())
}

/// Rotate a near-degenerate pair of eigenvectors `(lo, hi)` into the
/// sublattice-resolved combinations `(w_A ± w_B)/sqrt 2`, where `w_A`
/// carries the a-sublattice weight. Pairs split by more than `tolerance` are
/// returned unchanged.
pub fn resolve_degenerate_pair(
    spectrum: &SpectrumSnapshot,
    spec: &ChainSpec,
    lo: usize,
    hi: usize,
    tolerance: f64,
) -> (StateVector, StateVector) {
    let u1 = spectrum.vector(lo);
    let u2 = spectrum.vector(hi);
    if (spectrum.eigenvalues[hi] - spectrum.eigenvalues[lo]).abs() > tolerance {
        return (u1, u2);
    }
    let project_a = |u: &StateVector| -> Vec<Complex64> {
        u.amplitudes()
            .iter()
            .enumerate()
            .map(|(s, z)| if spec.sublattice(s) == Sublattice::A { *z } else { Complex64::new(0.0, 0.0) })
            .collect()
    };
    let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>();
    let (a1, a2) = (project_a(&u1), project_a(&u2));
    let m = Matrix2::new(dot(&a1, &a1), dot(&a1, &a2), dot(&a2, &a1), dot(&a2, &a2));
    let eig = SymmetricEigen::new(m);
    let top = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let combine = |c: NVec<Complex64>| -> Vec<Complex64> {
        let mut w: Vec<Complex64> = u1
            .amplitudes()
            .iter()
            .zip(u2.amplitudes())
            .map(|(x, y)| c[0] * x + c[1] * y)
            .collect();
        fix_phase(&mut w);
        w
    };
    let col = |i: usize| NVec::from_iterator(2, eig.eigenvectors.column(i).iter().copied());
    let wa = combine(col(top));
    let wb = combine(col(1 - top));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = wa.iter().zip(&wb).map(|(a, b)| (a + b) * s).collect::<Vec<_>>();
    let minus = wa.iter().zip(&wb).map(|(a, b)| (a - b) * s).collect::<Vec<_>>();
    (StateVector::from(plus), StateVector::from(minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_interface_hamiltonian, build_ssh_hamiltonian, CouplingPoint};
    use crate::spectral::eigh;
    use approx::assert_abs_diff_eq;

    #[test]
    fn edge_states_live_on_one_sublattice() {
        let pair = analytic_edge_states(6, 0.4, 1.0).unwrap();
        for (s, (l, r)) in pair.left.amplitudes().iter().zip(pair.right.amplitudes()).enumerate() {
            if s % 2 == 0 {
                assert_eq!(*r, Complex64::new(0.0, 0.0));
            } else {
                assert_eq!(*l, Complex64::new(0.0, 0.0));
            }
        }
        assert_abs_diff_eq!(pair.left.norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pair.right.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn fully_dimerized_limit() {
        let pair = analytic_edge_states(5, 0.0, 1.0).unwrap();
        assert_eq!(pair.hybrid_energy, 0.0);
        assert_eq!(pair.left.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(pair.left.amplitudes()[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn three_cell_overlap_value() {
        let pair = analytic_edge_states(3, 0.6, 1.0).unwrap();
        // xi = -0.6: |J2 xi^3 (xi^2 - 1) / (xi^6 - 1)| = 0.216 * 0.64 / 0.953344
        assert_abs_diff_eq!(pair.hybrid_energy, 0.13824 / 0.953344, epsilon = 1e-15);
        assert_abs_diff_eq!(pair.hybrid_energy, 0.14501, epsilon = 5e-6);
    }

    #[test]
    fn hybrid_energy_vanishes_with_size() {
        let mut prev = f64::INFINITY;
        for n in [5, 10, 20, 40] {
            let e = analytic_edge_states(n, 0.6, 1.0).unwrap().hybrid_energy;
            assert!(e < prev);
            prev = e;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn trivial_phase_rejected() {
        assert!(analytic_edge_states(5, 1.0, 0.6).is_err());
        assert!(analytic_edge_states(5, 1.0, 0.0).is_err());
    }

    #[test]
    fn gap_state_limits() {
        let spec = ChainSpec::interface(20).unwrap();
        let v = analytic_gap_state(&spec, 1.0, 0.0).unwrap();
        assert_eq!(v.amplitudes()[20], Complex64::new(1.0, 0.0));
        assert!((v.populations().iter().sum::<f64>() - 1.0).abs() < 1e-15);

        let v = analytic_gap_state(&spec, 0.0, 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(v.amplitudes()[0].re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(v.amplitudes()[40].re, s, epsilon = 1e-15);
    }

    #[test]
    fn gap_state_is_exact_eigenvector_of_interface_chain() {
        let spec = ChainSpec::interface(20).unwrap();
        for (j1, j2, va) in [(0.6, 1.0, 0.3), (2.5, 0.4, -0.7), (1e3, 1e-3, 0.1)] {
            let h = build_interface_hamiltonian(&spec, &CouplingPoint::rice_mele(j1, j2, va)).unwrap();
            let v = analytic_gap_state(&spec, j1, j2).unwrap();
            let hv = h.entries() * NVec::from_column_slice(v.amplitudes());
            for (x, y) in hv.iter().zip(v.amplitudes()) {
                assert_abs_diff_eq!((x - y * va).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn odd_chain_zero_mode_matches_numerics() {
        let spec = ChainSpec::odd_ssh(20).unwrap();
        let h = build_ssh_hamiltonian(&spec, &CouplingPoint::ssh(0.6, 1.0)).unwrap();
        let s = eigh(&h).unwrap();
        let analytic = analytic_gap_state(&spec, 0.6, 1.0).unwrap();
        let (idx, overlap) = s.best_overlap(&analytic);
        assert!(s.eigenvalues[idx].abs() < 1e-10);
        assert!(overlap > 0.9999);
    }

    #[test]
    fn even_chain_is_rejected() {
        let spec = ChainSpec::even_ssh(4).unwrap();
        assert!(analytic_gap_state(&spec, 0.5, 1.0).is_err());
    }

    #[test]
    fn degenerate_pair_is_resolved_by_sublattice() {
        // N = 30, J1/J2 = 0.1: splitting far below machine precision.
        let spec = ChainSpec::even_ssh(30).unwrap();
        let h = build_ssh_hamiltonian(&spec, &CouplingPoint::ssh(0.1, 1.0)).unwrap();
        let s = eigh(&h).unwrap();
        let (plus, minus) = resolve_degenerate_pair(&s, &spec, 29, 30, 1e-12);
        let pair = analytic_edge_states(30, 0.1, 1.0).unwrap();
        let (ap, am) = pair.hybridized();
        assert!(plus.overlap(&ap).norm_sqr() > 0.999);
        assert!(minus.overlap(&am).norm_sqr() > 0.999);
    }
}
