use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{ChainSpec, Topology};

/// Complex site amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl From<Vec<Complex64>> for StateVector {
    fn from(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }
}

impl StateVector {
    pub fn from_real(values: &[f64]) -> Self {
        Self {
            amplitudes: values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    /// Unit amplitude on `site`.
    pub fn basis(len: usize, site: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); len];
        amplitudes[site] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Copy scaled to unit norm; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Self {
            amplitudes: self.amplitudes.iter().map(|z| z / n).collect(),
        }
    }

    /// `|psi_s|^2` per site.
    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `arg psi_s` per site in `(-pi, pi]`.
    pub fn phases(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.arg()).collect()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<target|self>|^2` without renormalizing `self`.
    pub fn fidelity(&self, target: &StateVector) -> f64 {
        target.overlap(self).norm_sqr()
    }
}

/// Input state: the interface site, the router hub, or the right end of an
/// odd chain (where every schedule's initial zero mode sits).
pub fn initial_state(spec: &ChainSpec) -> Result<StateVector> {
    let site = match spec.topology() {
        Topology::Interface | Topology::Router => spec.hub().expect("hub exists"),
        Topology::OddSsh => spec.len() - 1,
        Topology::EvenSsh => return Err(no_port(spec)),
    };
    Ok(StateVector::basis(spec.len(), site))
}

/// Target state: equal amplitude and phase on every outer end, or the left
/// end of an odd chain.
pub fn target_state(spec: &ChainSpec) -> Result<StateVector> {
    let len = spec.len();
    match spec.topology() {
        Topology::Interface | Topology::Router => {
            let ends = spec.end_sites();
            let w = 1.0 / (ends.len() as f64).sqrt();
            let mut v = vec![0.0; len];
            for s in ends {
                v[s] = w;
            }
            Ok(StateVector::from_real(&v))
        }
        Topology::OddSsh => Ok(StateVector::basis(len, 0)),
        Topology::EvenSsh => Err(no_port(spec)),
    }
}

fn no_port(spec: &ChainSpec) -> Error {
    Error::WrongTopology {
        expected: "interface, router or odd-ssh",
        actual: spec.topology().name(),
    }
}

/// Below this end-site amplitude the phase is reported as undefined.
pub const PHASE_AMPLITUDE_FLOOR: f64 = 1e-6;

/// `arg psi_end1 - arg psi_end2`, wrapped to `(-pi, pi]`. For routers, the
/// pairwise difference of largest magnitude over all ends.
pub fn phase_difference(state: &StateVector, spec: &ChainSpec) -> Result<f64> {
    let ends = match spec.topology() {
        Topology::Interface | Topology::Router => spec.end_sites(),
        _ => return Err(no_port(spec)),
    };
    let amps = state.amplitudes();
    for &s in &ends {
        let a = amps[s].norm();
        if a < PHASE_AMPLITUDE_FLOOR {
            return Err(Error::PhaseUndefined { amplitude: a });
        }
    }
    let mut best = 0.0f64;
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            let d = wrap_phase(amps[ends[i]].arg() - amps[ends[j]].arg());
            if d.abs() > best.abs() {
                best = d;
            }
        }
    }
    Ok(best)
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}
