use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{analytic_gap_state, hermitian_eigen, EigenOptions, SpectrumSnapshot};
use crate::dynamics::StateVector;
use crate::error::{invalid, Error, Result};
use crate::lattice::{ChainSpec, CouplingPoint, DisorderRealization, DisorderSymmetry, HamiltonianMatrix, SiteCouplings};
use crate::protocol::DriveSchedule;

/// Which part of the spectrum neighbor gaps are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SectorChoice {
    /// Symmetric sector whenever the chain and disorder preserve the mirror
    /// (branch-permutation) symmetry, full spectrum otherwise.
    #[default]
    Auto,
    Full,
    Symmetric,
}

#[derive(Debug, Clone, Default)]
pub struct GapTrackOptions {
    pub disorder: Option<DisorderRealization>,
    pub sector: SectorChoice,
}

/// Gap-state energy, neighbor gap and state along a time grid.
#[derive(Debug, Clone)]
pub struct GapTrack {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub neighbor_gaps: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Overlap of each step's gap state with the previous step's.
    pub continuity: Vec<f64>,
    pub min_gap: f64,
    pub min_gap_time: f64,
}

/// Sparse isometry from a reduced basis to the site basis.
struct Reduction {
    columns: Vec<Vec<(usize, f64)>>,
    dim: usize,
}

impl Reduction {
    fn choose(spec: &ChainSpec, disorder: Option<&DisorderRealization>, choice: SectorChoice) -> Result<Option<Self>> {
        let symmetric_ok = disorder.is_none_or(|d| d.symmetry == DisorderSymmetry::MirrorSymmetric);
        let sector = spec.symmetric_sector();
        match choice {
            SectorChoice::Full => Ok(None),
            SectorChoice::Auto => Ok(sector.filter(|_| symmetric_ok).map(|columns| Self {
                columns,
                dim: spec.len(),
            })),
            SectorChoice::Symmetric => match sector {
                Some(columns) if symmetric_ok => Ok(Some(Self {
                    columns,
                    dim: spec.len(),
                })),
                _ => Err(invalid(
                    "sector",
                    "symmetric sector requires an interface/router chain without asymmetric disorder",
                )),
            },
        }
    }

    fn reduce(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let k = self.columns.len();
        DMatrix::from_fn(k, k, |a, b| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(i, wi) in &self.columns[a] {
                for &(j, wj) in &self.columns[b] {
                    acc += m[(i, j)] * (wi * wj);
                }
            }
            acc
        })
    }

    fn embed(&self, v: &[Complex64]) -> StateVector {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (c, col) in self.columns.iter().enumerate() {
            for &(s, w) in col {
                out[s] += v[c] * w;
            }
        }
        StateVector::from(out)
    }

    fn project(&self, v: &StateVector) -> StateVector {
        let a = v.amplitudes();
        StateVector::from(
            self.columns
                .iter()
                .map(|col| col.iter().map(|&(s, w)| a[s] * w).sum::<Complex64>())
                .collect::<Vec<_>>(),
        )
    }
}

fn hamiltonian_at(spec: &ChainSpec, c: &CouplingPoint, disorder: Option<&DisorderRealization>) -> Result<HamiltonianMatrix> {
    HamiltonianMatrix::from_couplings(spec, &SiteCouplings::at(spec, c, disorder)?)
}

struct SectorSpectrum {
    snapshot: SpectrumSnapshot,
    reduction: Option<Reduction>,
}

impl SectorSpectrum {
    fn new(h: &HamiltonianMatrix, reduction: Option<Reduction>) -> Result<Self> {
        let m = match &reduction {
            Some(r) => r.reduce(h.entries()),
            None => h.entries().clone(),
        };
        Ok(Self {
            snapshot: hermitian_eigen(&m, &EigenOptions::default())?,
            reduction,
        })
    }

    fn to_sector(&self, v: &StateVector) -> StateVector {
        match &self.reduction {
            Some(r) => r.project(v),
            None => v.clone(),
        }
    }

    fn full_vector(&self, i: usize) -> StateVector {
        let v = self.snapshot.vector(i);
        match &self.reduction {
            Some(r) => r.embed(v.amplitudes()),
            None => v,
        }
    }
}

/// Follow the gap state along `times` by maximal overlap with the previous
/// step, seeded by the analytic gap state at the first time.
pub fn gap_tracking(
    spec: &ChainSpec,
    schedule: &DriveSchedule,
    times: &[f64],
    options: &GapTrackOptions,
) -> Result<GapTrack> {
    if times.is_empty() {
        return Err(invalid("t_grid", "empty time grid"));
    }
    let disorder = options.disorder.as_ref();
    let first = schedule.at(times[0])?;
    let mut reference = analytic_gap_state(spec, first.j1, first.j2)?;
    let mut track = GapTrack {
        times: times.to_vec(),
        energies: Vec::with_capacity(times.len()),
        neighbor_gaps: Vec::with_capacity(times.len()),
        states: Vec::with_capacity(times.len()),
        continuity: Vec::with_capacity(times.len()),
        min_gap: f64::INFINITY,
        min_gap_time: times[0],
    };
    for &t in times {
        let c = schedule.at(t)?;
        let h = hamiltonian_at(spec, &c, disorder)?;
        let reduction = Reduction::choose(spec, disorder, options.sector)?;
        let spectrum = SectorSpectrum::new(&h, reduction)?;
        let target = spectrum.to_sector(&reference);
        let (idx, overlap) = spectrum.snapshot.best_overlap(&target.normalized());
        if overlap < 0.5 {
            return Err(Error::ContinuityLost { t, overlap });
        }
        let gap = spectrum.snapshot.neighbor_gap(idx);
        track.energies.push(spectrum.snapshot.eigenvalues[idx]);
        track.neighbor_gaps.push(gap);
        track.continuity.push(overlap);
        if gap < track.min_gap {
            track.min_gap = gap;
            track.min_gap_time = t;
        }
        reference = spectrum.full_vector(idx);
        track.states.push(reference.clone());
    }
    Ok(track)
}

/// `sum_{m != n} |<n| dH/dt |m>| / |E_m - E_n|` for the gap state `n`.
pub fn adiabaticity_metric(
    spec: &ChainSpec,
    schedule: &DriveSchedule,
    t: f64,
    options: &GapTrackOptions,
) -> Result<f64> {
    let disorder = options.disorder.as_ref();
    let c = schedule.at(t)?;
    let dc = c.derivative();
    if ![dc.j1, dc.j2, dc.va, dc.vb].iter().all(|x| x.is_finite()) {
        return Err(invalid("schedule", format!("dH/dt is not finite at t = {t}")));
    }
    let h = hamiltonian_at(spec, &c, disorder)?;
    let dh = HamiltonianMatrix::from_couplings(spec, &SiteCouplings::at_unchecked(spec, &dc, disorder)?)?;
    let reduction = Reduction::choose(spec, disorder, options.sector)?;
    let dh_red = match &reduction {
        Some(r) => r.reduce(dh.entries()),
        None => dh.entries().clone(),
    };
    let spectrum = SectorSpectrum::new(&h, reduction)?;
    let reference = spectrum.to_sector(&analytic_gap_state(spec, c.j1, c.j2)?).normalized();
    let (n, _) = spectrum.snapshot.best_overlap(&reference);
    let vecs = &spectrum.snapshot.eigenvectors;
    let energies = &spectrum.snapshot.eigenvalues;
    let dh_n = dh_red.clone().adjoint() * vecs.column(n);
    let mut total = 0.0;
    for m in 0..energies.len() {
        if m == n {
            continue;
        }
        let gap = (energies[m] - energies[n]).abs();
        if gap < 1e-12 {
            return Err(Error::NearDegenerate { t, gap });
        }
        let element: Complex64 = dh_n.iter().zip(vecs.column(m).iter()).map(|(a, b)| a.conj() * b).sum();
        total += element.norm() / gap;
    }
    Ok(total)
}
