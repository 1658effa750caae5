//! Eigen-analysis of real-space and Bloch Hamiltonians.

mod bloch;
mod edge;
mod tracking;

pub use bloch::{d_vector, dispersion, winding_number, DVector, Winding};
pub use edge::{analytic_edge_states, analytic_gap_state, resolve_degenerate_pair, EdgeStatePair};
pub use tracking::{adiabaticity_metric, gap_tracking, GapTrack, GapTrackOptions, SectorChoice};

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::dynamics::StateVector;
use crate::error::{invalid, Error, Result};
use crate::lattice::HamiltonianMatrix;

/// Default dimension cap for dense eigensolves.
pub const DEFAULT_DIM_CAP: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub dim_cap: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dim_cap: DEFAULT_DIM_CAP,
            tolerance: f64::EPSILON,
            max_iterations: 0,
        }
    }
}

/// Hermitian spectrum: ascending real eigenvalues with phase-fixed,
/// orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSnapshot {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<Complex64>,
    /// Set by gap tracking; `None` for a bare eigendecomposition.
    pub gap_state_index: Option<usize>,
    pub min_neighbor_gap: Option<f64>,
}

impl SpectrumSnapshot {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, i: usize) -> StateVector {
        StateVector::from(self.eigenvectors.column(i).iter().copied().collect::<Vec<_>>())
    }

    /// Distance from level `i` to the nearest other level.
    pub fn neighbor_gap(&self, i: usize) -> f64 {
        let e = &self.eigenvalues;
        let below = if i > 0 { e[i] - e[i - 1] } else { f64::INFINITY };
        let above = if i + 1 < e.len() { e[i + 1] - e[i] } else { f64::INFINITY };
        below.min(above)
    }

    /// Index of the eigenvector with the largest `|<v_i|psi>|^2`, and that
    /// overlap.
    pub fn best_overlap(&self, psi: &StateVector) -> (usize, f64) {
        let mut best = (0, -1.0);
        for i in 0..self.len() {
            let o = overlap_sq(&self.eigenvectors, i, psi.amplitudes());
            if o > best.1 {
                best = (i, o);
            }
        }
        best
    }

    /// `max |H - V diag(E) V^dagger|`.
    pub fn reconstruction_error(&self, h: &HamiltonianMatrix) -> f64 {
        let v = &self.eigenvectors;
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.len(),
            self.eigenvalues.iter().map(|&e| Complex64::new(e, 0.0)),
        ));
        let rebuilt = v * lambda * v.adjoint();
        (h.entries() - rebuilt).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Non-Hermitian spectrum sorted by real part.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: DMatrix<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    Hermitian(SpectrumSnapshot),
    NonHermitian(ComplexSpectrum),
}

impl Spectrum {
    /// Eigenvalues as complex numbers regardless of the path taken.
    pub fn complex_eigenvalues(&self) -> Vec<Complex64> {
        match self {
            Spectrum::Hermitian(s) => s.eigenvalues.iter().map(|&e| Complex64::new(e, 0.0)).collect(),
            Spectrum::NonHermitian(s) => s.eigenvalues.clone(),
        }
    }
}

/// Full dense eigendecomposition; dispatches on the Hermitian flag.
pub fn eigendecompose(h: &HamiltonianMatrix) -> Result<Spectrum> {
    eigendecompose_with(h, &EigenOptions::default())
}

pub fn eigendecompose_with(h: &HamiltonianMatrix, options: &EigenOptions) -> Result<Spectrum> {
    if h.is_hermitian() {
        hermitian_eigen(h.entries(), options).map(Spectrum::Hermitian)
    } else {
        general_eigen(h.entries(), options).map(Spectrum::NonHermitian)
    }
}

/// Hermitian path only; errors on a non-Hermitian input.
pub fn eigh(h: &HamiltonianMatrix) -> Result<SpectrumSnapshot> {
    if !h.is_hermitian() {
        return Err(invalid("hamiltonian", "eigh requires a Hermitian matrix"));
    }
    hermitian_eigen(h.entries(), &EigenOptions::default())
}

pub(crate) fn hermitian_eigen(m: &DMatrix<Complex64>, options: &EigenOptions) -> Result<SpectrumSnapshot> {
    let dim = m.nrows();
    if dim > options.dim_cap {
        return Err(Error::MatrixTooLarge {
            dim,
            cap: options.dim_cap,
        });
    }
    let eig = SymmetricEigen::try_new(m.clone(), options.tolerance, options.max_iterations)
        .ok_or(Error::NoConvergence {
            dim,
            tolerance: options.tolerance,
        })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<Complex64>::zeros(dim, dim);
    for (col, &i) in order.iter().enumerate() {
        let mut v: Vec<Complex64> = eig.eigenvectors.column(i).iter().copied().collect();
        fix_phase(&mut v);
        vectors.set_column(col, &nalgebra::DVector::from_vec(v));
    }
    Ok(SpectrumSnapshot {
        eigenvalues,
        eigenvectors: vectors,
        gap_state_index: None,
        min_neighbor_gap: None,
    })
}

fn general_eigen(m: &DMatrix<Complex64>, options: &EigenOptions) -> Result<ComplexSpectrum> {
    let dim = m.nrows();
    if dim > options.dim_cap {
        return Err(Error::MatrixTooLarge {
            dim,
            cap: options.dim_cap,
        });
    }
    let (q, t) = Schur::try_new(m.clone(), options.tolerance, options.max_iterations)
        .ok_or(Error::NoConvergence {
            dim,
            tolerance: options.tolerance,
        })?
        .unpack();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = (0..dim)
        .map(|k| {
            let lambda = t[(k, k)];
            // back substitution for (T - lambda) y = 0 with y_k = 1
            let mut y = vec![Complex64::new(0.0, 0.0); dim];
            y[k] = Complex64::new(1.0, 0.0);
            for j in (0..k).rev() {
                let s: Complex64 = (j + 1..=k).map(|l| t[(j, l)] * y[l]).sum();
                let mut d = t[(j, j)] - lambda;
                if d.norm() < f64::EPSILON * scale {
                    d = Complex64::new(f64::EPSILON * scale, 0.0);
                }
                y[j] = -s / d;
            }
            let yv = nalgebra::DVector::from_vec(y);
            let mut v: Vec<Complex64> = (&q * yv).iter().copied().collect();
            fix_phase(&mut v);
            (lambda, v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    let mut vectors = DMatrix::<Complex64>::zeros(dim, dim);
    for (col, (_, v)) in pairs.iter().enumerate() {
        vectors.set_column(col, &nalgebra::DVector::from_column_slice(v));
    }
    Ok(ComplexSpectrum {
        eigenvalues: pairs.into_iter().map(|(l, _)| l).collect(),
        eigenvectors: vectors,
    })
}

/// Normalize and rotate so the largest-magnitude component is real-positive.
/// Ties (within a relative 1e-9) resolve to the lowest index.
pub(crate) fn fix_phase(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-9))
        .unwrap_or(0);
    let rot = v[pivot].conj() / (v[pivot].norm() * norm);
    for z in v.iter_mut() {
        *z *= rot;
    }
    v[pivot] = Complex64::new(v[pivot].re, 0.0);
}

fn overlap_sq(vectors: &DMatrix<Complex64>, col: usize, psi: &[Complex64]) -> f64 {
    vectors
        .column(col)
        .iter()
        .zip(psi)
        .map(|(v, p)| v.conj() * p)
        .sum::<Complex64>()
        .norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_bloch_hamiltonian, build_ssh_hamiltonian, ChainSpec, CouplingPoint, LossModel, apply_loss};
    use approx::assert_abs_diff_eq;

    #[test]
    fn bloch_matrix_gap_at_pi() {
        let h = build_bloch_hamiltonian(std::f64::consts::PI, &CouplingPoint::ssh(1.0, 0.6));
        let h = HamiltonianMatrix::from_entries(DMatrix::from_fn(2, 2, |i, j| h[(i, j)])).unwrap();
        let s = eigh(&h).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvalues[1], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn odd_chain_has_zero_mode() {
        let spec = ChainSpec::odd_ssh(20).unwrap();
        let h = build_ssh_hamiltonian(&spec, &CouplingPoint::ssh(0.6, 1.0)).unwrap();
        let s = eigh(&h).unwrap();
        let zero = s.eigenvalues.iter().filter(|e| e.abs() < 1e-10).count();
        assert_eq!(zero, 1);
        assert_abs_diff_eq!(s.eigenvalues[20], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn trivial_even_chain_has_no_midgap_states() {
        let spec = ChainSpec::even_ssh(20).unwrap();
        let h = build_ssh_hamiltonian(&spec, &CouplingPoint::ssh(2.0, 1.0)).unwrap();
        let s = eigh(&h).unwrap();
        assert!(s.eigenvalues.iter().all(|e| e.abs() >= 0.9));
    }

    #[test]
    fn eigenpairs_are_accurate_and_orthonormal() {
        let spec = ChainSpec::interface(10).unwrap();
        let h = crate::lattice::build_interface_hamiltonian(&spec, &CouplingPoint::rice_mele(0.45, 0.8, 0.35)).unwrap();
        let s = eigh(&h).unwrap();
        assert!(s.reconstruction_error(&h) < 1e-9);
        let gram = s.eigenvectors.adjoint() * &s.eigenvectors;
        for i in 0..s.len() {
            for j in 0..s.len() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[(i, j)].norm(), expected, epsilon = 1e-10);
            }
            let v = nalgebra::DVector::from_iterator(s.len(), s.eigenvectors.column(i).iter().copied());
            let resid = h.entries() * &v - v.clone() * Complex64::new(s.eigenvalues[i], 0.0);
            assert!(resid.norm() < 1e-9);
        }
    }

    #[test]
    fn eigenvectors_are_phase_fixed() {
        let spec = ChainSpec::even_ssh(6).unwrap();
        let h = build_ssh_hamiltonian(&spec, &CouplingPoint::ssh(0.3, 1.0)).unwrap();
        let s = eigh(&h).unwrap();
        for i in 0..s.len() {
            let col: Vec<Complex64> = s.eigenvectors.column(i).iter().copied().collect();
            let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let pivot = col.iter().find(|z| z.norm() >= max * (1.0 - 1e-9)).unwrap();
            assert!(pivot.re > 0.0 && pivot.im == 0.0);
        }
    }

    #[test]
    fn size_cap_is_enforced() {
        let h = HamiltonianMatrix::from_entries(DMatrix::<Complex64>::identity(5, 5)).unwrap();
        let opts = EigenOptions {
            dim_cap: 4,
            ..EigenOptions::default()
        };
        assert!(matches!(
            eigendecompose_with(&h, &opts),
            Err(Error::MatrixTooLarge { dim: 5, cap: 4 })
        ));
    }

    #[test]
    fn uniform_loss_shifts_spectrum_down() {
        let spec = ChainSpec::odd_ssh(5).unwrap();
        let h = build_ssh_hamiltonian(&spec, &CouplingPoint::new(0.6, 1.0, 0.2, -0.2)).unwrap();
        let clean = eigh(&h).unwrap();
        let lossy = apply_loss(&h, &LossModel::uniform(&spec, 0.05).unwrap()).unwrap();
        let Spectrum::NonHermitian(s) = eigendecompose(&lossy).unwrap() else {
            panic!("expected the non-Hermitian path");
        };
        for (z, e) in s.eigenvalues.iter().zip(&clean.eigenvalues) {
            assert_abs_diff_eq!(z.re, *e, epsilon = 1e-9);
            assert_abs_diff_eq!(z.im, -0.05, epsilon = 1e-9);
        }
        for (k, z) in s.eigenvalues.iter().enumerate() {
            let v = nalgebra::DVector::from_iterator(s.eigenvectors.nrows(), s.eigenvectors.column(k).iter().copied());
            let resid = lossy.entries() * &v - v.clone() * *z;
            assert!(resid.norm() < 1e-8, "residual {}", resid.norm());
        }
    }
}
