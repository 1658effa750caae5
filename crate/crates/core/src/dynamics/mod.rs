//! Fourth-order Runge-Kutta evolution of site amplitudes under a driven,
//! possibly lossy, Hamiltonian.

mod state;

pub use state::{initial_state, phase_difference, target_state, wrap_phase, StateVector, PHASE_AMPLITUDE_FLOOR};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::lattice::{BondKind, ChainSpec, CouplingPoint, DisorderRealization, LossModel, Sublattice};
use crate::protocol::DriveSchedule;

/// Largest allowed `dt * max_t ||H(t)||`.
pub const STABILITY_LIMIT: f64 = 0.1;
pub const DEFAULT_FRAMES: usize = 500;

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// Step size; `None` picks `min(0.005, t*/20000)`.
    pub dt: Option<f64>,
    pub disorder: Option<DisorderRealization>,
    pub loss: Option<LossModel>,
    /// Number of recorded frames including `t = 0` and `t = t*`; `0`
    /// records none.
    pub frames: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: None,
            disorder: None,
            loss: None,
            frames: DEFAULT_FRAMES,
        }
    }
}

impl EvolveOptions {
    /// No frames recorded; for sweeps that only need the final state.
    pub fn final_only() -> Self {
        Self {
            frames: 0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub final_state: StateVector,
    /// `|<target|psi(t*)>|^2`, not renormalized.
    pub fidelity: f64,
    pub dt: f64,
    pub steps: usize,
    pub frame_times: Vec<f64>,
    /// `|psi_s|^2` per frame and site.
    pub populations: Vec<Vec<f64>>,
    /// `||psi||` per frame.
    pub norms: Vec<f64>,
    /// `arg psi_s(t*)` per site.
    pub phase_profile: Vec<f64>,
    /// `max_t |1 - ||psi(t)||^2 / ||psi(0)||^2|` over every step.
    pub max_norm_drift: f64,
}

impl EvolutionResult {
    pub fn phase_difference(&self, spec: &ChainSpec) -> Result<f64> {
        phase_difference(&self.final_state, spec)
    }

    /// Final populations of the outer end sites.
    pub fn end_populations(&self, spec: &ChainSpec) -> Vec<f64> {
        let amps = self.final_state.amplitudes();
        spec.end_sites().iter().map(|&s| amps[s].norm_sqr()).collect()
    }
}

pub fn default_dt(t_star: f64) -> f64 {
    (0.005f64).min(t_star / 20000.0)
}

/// Time-dependent site Hamiltonian in bond-list form.
struct Kernel {
    is_b: Vec<bool>,
    site_factor: Vec<f64>,
    gamma: Vec<f64>,
    bonds: Vec<(usize, usize, BondKind, f64)>,
    onsite: Vec<Complex64>,
    hopping: Vec<f64>,
}

impl Kernel {
    fn new(spec: &ChainSpec, disorder: Option<&DisorderRealization>, loss: Option<&LossModel>) -> Result<Self> {
        let len = spec.len();
        if let Some(d) = disorder {
            d.check(spec)?;
        }
        let gamma = match loss {
            Some(l) if l.rates().len() != len => {
                return Err(Error::DimensionMismatch {
                    what: "loss rates",
                    expected: len,
                    actual: l.rates().len(),
                })
            }
            Some(l) => l.rates().to_vec(),
            None => vec![0.0; len],
        };
        let site_factor = disorder.map_or_else(|| vec![1.0; len], |d| d.site_factors.clone());
        let bonds = spec
            .bonds()
            .iter()
            .enumerate()
            .map(|(b, bond)| {
                let f = disorder.map_or(1.0, |d| d.bond_factors[b]);
                (bond.sites.0, bond.sites.1, bond.kind, f)
            })
            .collect::<Vec<_>>();
        Ok(Self {
            is_b: (0..len).map(|s| spec.sublattice(s) == Sublattice::B).collect(),
            site_factor,
            gamma,
            onsite: vec![Complex64::new(0.0, 0.0); len],
            hopping: vec![0.0; bonds.len()],
            bonds,
        })
    }

    fn set(&mut self, c: &CouplingPoint) {
        for s in 0..self.onsite.len() {
            let v = if self.is_b[s] { c.vb } else { c.va };
            self.onsite[s] = Complex64::new(v * self.site_factor[s], -self.gamma[s]);
        }
        for (h, &(_, _, kind, f)) in self.hopping.iter_mut().zip(&self.bonds) {
            *h = f * match kind {
                BondKind::Intra => c.j1,
                BondKind::Inter => c.j2,
            };
        }
    }

    /// Gershgorin bound on `||H||`.
    fn bound(&self) -> f64 {
        let mut row: Vec<f64> = self.onsite.iter().map(|z| z.norm()).collect();
        for (&(i, j, _, _), &h) in self.bonds.iter().zip(&self.hopping) {
            row[i] += h.abs();
            row[j] += h.abs();
        }
        row.into_iter().fold(0.0, f64::max)
    }

    /// `out = -i H psi`.
    fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        for ((o, e), p) in out.iter_mut().zip(&self.onsite).zip(psi) {
            *o = e * p;
        }
        for (&(i, j, _, _), &h) in self.bonds.iter().zip(&self.hopping) {
            out[i] += psi[j] * h;
            out[j] += psi[i] * h;
        }
        for o in out.iter_mut() {
            *o = Complex64::new(o.im, -o.re);
        }
    }
}

/// Largest Gershgorin bound of `H(t)` over a fine sample of the schedule.
fn schedule_bound(kernel: &mut Kernel, schedule: &DriveSchedule) -> Result<f64> {
    const SAMPLES: usize = 512;
    let mut worst: f64 = 0.0;
    for i in 0..=SAMPLES {
        let c = schedule.at(schedule.t_star * i as f64 / SAMPLES as f64)?;
        kernel.set(&c);
        worst = worst.max(kernel.bound());
    }
    Ok(worst)
}

/// Evolve `initial_state(spec)` over the schedule and score it against
/// `target_state(spec)`.
pub fn evolve(spec: &ChainSpec, schedule: &DriveSchedule, options: &EvolveOptions) -> Result<EvolutionResult> {
    evolve_from(spec, schedule, &initial_state(spec)?, &target_state(spec)?, options)
}

/// Evolve an arbitrary initial state; `target` is only used for the
/// reported fidelity.
pub fn evolve_from(
    spec: &ChainSpec,
    schedule: &DriveSchedule,
    initial: &StateVector,
    target: &StateVector,
    options: &EvolveOptions,
) -> Result<EvolutionResult> {
    let len = spec.len();
    for (what, v) in [("initial state", initial), ("target state", target)] {
        if v.len() != len {
            return Err(Error::DimensionMismatch {
                what,
                expected: len,
                actual: v.len(),
            });
        }
    }
    let t_star = schedule.t_star;
    let dt = options.dt.unwrap_or_else(|| default_dt(t_star));
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
    }
    let steps = (t_star / dt).ceil().max(1.0) as usize;
    let h = t_star / steps as f64;

    let mut kernel = Kernel::new(spec, options.disorder.as_ref(), options.loss.as_ref())?;
    let product = h * schedule_bound(&mut kernel, schedule)?;
    if product > STABILITY_LIMIT {
        return Err(Error::StabilityGuard { dt: h, product });
    }

    let frame_steps = frame_schedule(steps, options.frames);
    let mut next_frame = 0;
    let mut frame_times = Vec::with_capacity(frame_steps.len());
    let mut populations = Vec::with_capacity(frame_steps.len());
    let mut norms = Vec::with_capacity(frame_steps.len());

    let norm0 = initial.norm_sqr();
    let mut max_drift: f64 = 0.0;
    let mut psi = initial.amplitudes().to_vec();
    let zero = Complex64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![zero; len], vec![zero; len], vec![zero; len], vec![zero; len], vec![zero; len]);

    let mut record = |step: usize, psi: &[Complex64]| {
        if next_frame < frame_steps.len() && frame_steps[next_frame] == step {
            let pops: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
            norms.push(pops.iter().sum::<f64>().sqrt());
            populations.push(pops);
            frame_times.push(step as f64 * h);
            next_frame += 1;
        }
    };
    record(0, &psi);

    let mut c_start = schedule.at(0.0)?;
    for step in 0..steps {
        let t0 = step as f64 * h;
        let c_mid = schedule.at(t0 + 0.5 * h)?;
        let c_end = schedule.at(if step + 1 == steps { t_star } else { (step + 1) as f64 * h })?;

        kernel.set(&c_start);
        kernel.apply(&psi, &mut k1);
        kernel.set(&c_mid);
        axpy(&psi, 0.5 * h, &k1, &mut tmp);
        kernel.apply(&tmp, &mut k2);
        axpy(&psi, 0.5 * h, &k2, &mut tmp);
        kernel.apply(&tmp, &mut k3);
        kernel.set(&c_end);
        axpy(&psi, h, &k3, &mut tmp);
        kernel.apply(&tmp, &mut k4);

        let w = h / 6.0;
        let mut norm = 0.0;
        for s in 0..len {
            psi[s] += (k1[s] + (k2[s] + k3[s]) * 2.0 + k4[s]) * w;
            norm += psi[s].norm_sqr();
        }
        if !norm.is_finite() {
            return Err(Error::NonFinite { t: t0 + h });
        }
        max_drift = max_drift.max((1.0 - norm / norm0).abs());
        c_start = c_end;
        record(step + 1, &psi);
    }

    let final_state = StateVector::from(psi);
    Ok(EvolutionResult {
        fidelity: final_state.fidelity(target),
        phase_profile: final_state.phases(),
        final_state,
        dt: h,
        steps,
        frame_times,
        populations,
        norms,
        max_norm_drift: max_drift,
    })
}

fn axpy(x: &[Complex64], a: f64, y: &[Complex64], out: &mut [Complex64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + yi * a;
    }
}

/// Step indices at which frames are recorded: `frames` values spread
/// uniformly over `0..=steps`, both ends included.
fn frame_schedule(steps: usize, frames: usize) -> Vec<usize> {
    match frames {
        0 => Vec::new(),
        1 => vec![steps],
        _ => {
            let frames = frames.min(steps + 1);
            let mut out: Vec<usize> = (0..frames)
                .map(|k| ((k as f64) * steps as f64 / (frames - 1) as f64).round() as usize)
                .collect();
            out.dedup();
            out
        }
    }
}

/// Fidelities at `dt` and `dt/2`, and their absolute difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub fidelity: f64,
    pub fidelity_half: f64,
    pub delta: f64,
}

pub fn convergence_check(
    spec: &ChainSpec,
    schedule: &DriveSchedule,
    dt: f64,
    options: &EvolveOptions,
) -> Result<ConvergenceReport> {
    let run = |dt: f64| {
        let opts = EvolveOptions {
            dt: Some(dt),
            frames: 0,
            ..options.clone()
        };
        evolve(spec, schedule, &opts).map(|r| r.fidelity)
    };
    let fidelity = run(dt)?;
    let fidelity_half = run(0.5 * dt)?;
    Ok(ConvergenceReport {
        fidelity,
        fidelity_half,
        delta: (fidelity - fidelity_half).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, CouplingPoint};
    use crate::spectral::eigh;
    use approx::assert_abs_diff_eq;

    #[test]
    fn frames_cover_both_ends() {
        assert_eq!(frame_schedule(10, 3), vec![0, 5, 10]);
        assert_eq!(frame_schedule(2, 500), vec![0, 1, 2]);
        assert_eq!(frame_schedule(10, 1), vec![10]);
        assert!(frame_schedule(10, 0).is_empty());
        let f = frame_schedule(20000, 500);
        assert_eq!(f.len(), 500);
        assert_eq!(*f.last().unwrap(), 20000);
    }

    #[test]
    fn constant_hamiltonian_matches_spectral_propagator() {
        let spec = ChainSpec::interface(4).unwrap();
        let c = CouplingPoint::rice_mele(0.7, 0.4, 0.3);
        let schedule = DriveSchedule::frozen(c, 10.0).unwrap();
        let psi0 = StateVector::from_real(&[0.3, -0.1, 0.5, 0.2, 0.6, 0.0, 0.1, 0.4, -0.2]).normalized();
        let r = evolve_from(&spec, &schedule, &psi0, &psi0, &EvolveOptions::default()).unwrap();

        let snap = eigh(&build_hamiltonian(&spec, &c).unwrap()).unwrap();
        let v = &snap.eigenvectors;
        let coeffs = v.adjoint() * nalgebra::DVector::from_column_slice(psi0.amplitudes());
        let mut exact = nalgebra::DVector::<Complex64>::zeros(spec.len());
        for (n, &e) in snap.eigenvalues.iter().enumerate() {
            exact += v.column(n) * (coeffs[n] * Complex64::from_polar(1.0, -e * 10.0));
        }
        for (a, b) in r.final_state.amplitudes().iter().zip(exact.iter()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn hermitian_evolution_conserves_norm() {
        let spec = ChainSpec::interface(10).unwrap();
        let s = DriveSchedule::exponential(1.0, 50.0, 3.2).unwrap();
        let r = evolve(&spec, &s, &EvolveOptions::default()).unwrap();
        assert!(r.max_norm_drift < 1e-8);
        assert!(r.norms.iter().all(|n| (n - 1.0).abs() < 1e-8));
    }

    #[test]
    fn uniform_loss_decays_exponentially() {
        let spec = ChainSpec::interface(10).unwrap();
        let gamma = 1e-3;
        let s = DriveSchedule::exponential(1.0, 50.0, 3.2).unwrap();
        let opts = EvolveOptions {
            loss: Some(LossModel::uniform(&spec, gamma).unwrap()),
            ..EvolveOptions::default()
        };
        let r = evolve(&spec, &s, &opts).unwrap();
        for (t, n) in r.frame_times.iter().zip(&r.norms) {
            let expected = (-2.0 * gamma * t).exp();
            assert!(((n * n) - expected).abs() / expected < 1e-6);
        }
        assert!(r.norms.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn clean_interface_stays_mirror_symmetric() {
        let spec = ChainSpec::interface(10).unwrap();
        let s = DriveSchedule::cosine(1.0, 30.0).unwrap();
        let r = evolve(&spec, &s, &EvolveOptions::default()).unwrap();
        let a = r.final_state.amplitudes();
        for i in 0..spec.len() {
            assert!((a[i] - a[spec.len() - 1 - i]).norm() < 1e-12);
        }
        assert_abs_diff_eq!(r.phase_difference(&spec).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn sudden_limit_has_zero_fidelity() {
        let spec = ChainSpec::interface(10).unwrap();
        let s = DriveSchedule::cosine(1.0, 1e-6).unwrap();
        let r = evolve(&spec, &s, &EvolveOptions::default()).unwrap();
        assert!(r.fidelity < 1e-12);
    }

    #[test]
    fn stability_guard_rejects_huge_steps() {
        let spec = ChainSpec::interface(10).unwrap();
        let s = DriveSchedule::cosine(1.0, 100.0).unwrap();
        let opts = EvolveOptions {
            dt: Some(0.5),
            ..EvolveOptions::default()
        };
        assert!(matches!(evolve(&spec, &s, &opts), Err(Error::StabilityGuard { .. })));
    }

    #[test]
    fn dimension_checks() {
        let spec = ChainSpec::interface(2).unwrap();
        let s = DriveSchedule::cosine(1.0, 1.0).unwrap();
        let bad = StateVector::basis(3, 0);
        let good = StateVector::basis(5, 0);
        assert!(evolve_from(&spec, &s, &bad, &good, &EvolveOptions::default()).is_err());
        assert!(evolve(&ChainSpec::even_ssh(3).unwrap(), &s, &EvolveOptions::default()).is_err());
    }
}
