//! Sweeps and ensembles built on [`crate::dynamics::evolve`].

mod fit;

pub use fit::{cubic_fit, CubicFit};

use rayon::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{evolve, EvolveOptions};
use crate::error::{invalid, Error, Result};
use crate::lattice::{ChainSpec, DisorderKind, DisorderSymmetry, Granularity, LossModel};
use crate::protocol::{realization_seed, sample_disorder, DriveSchedule, Protocol};

/// Final fidelity as a function of total time.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityCurve {
    pub t_star_grid: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub protocol: String,
    pub spec: String,
}

fn spec_tag(spec: &ChainSpec) -> String {
    format!("{}-L{}", spec.topology().name(), spec.len())
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid(name, "empty grid"));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(name, "grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// One evolution per grid point, run in parallel and collected in grid order.
pub fn fidelity_vs_time(
    spec: &ChainSpec,
    protocol: Protocol,
    j0: f64,
    t_star_grid: &[f64],
    options: &EvolveOptions,
) -> Result<FidelityCurve> {
    check_grid("t_star_grid", t_star_grid)?;
    let fidelity = t_star_grid
        .par_iter()
        .map(|&t| fidelity_at(spec, protocol, j0, t, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityCurve {
        t_star_grid: t_star_grid.to_vec(),
        fidelity,
        protocol: protocol.name().to_string(),
        spec: spec_tag(spec),
    })
}

/// Final fidelity of a single run with total time `t_star`.
pub fn fidelity_at(spec: &ChainSpec, protocol: Protocol, j0: f64, t_star: f64, options: &EvolveOptions) -> Result<f64> {
    let schedule = DriveSchedule::new(protocol, j0, t_star)?;
    let opts = EvolveOptions {
        frames: 0,
        ..options.clone()
    };
    Ok(evolve(spec, &schedule, &opts)?.fidelity)
}

/// Smallest grid time at which the fidelity is at least `theta` there and at
/// every later grid point; `None` if the last point is below `theta`.
pub fn stabilization_time(curve: &FidelityCurve, theta: f64) -> Option<f64> {
    stabilization_index(&curve.fidelity, theta).map(|i| curve.t_star_grid[i])
}

fn stabilization_index(fidelity: &[f64], theta: f64) -> Option<usize> {
    match fidelity.iter().rposition(|&f| f < theta) {
        None if fidelity.is_empty() => None,
        None => Some(0),
        Some(i) if i + 1 == fidelity.len() => None,
        Some(i) => Some(i + 1),
    }
}

/// Same result as [`stabilization_time`] on the full curve, but scans the
/// grid from the top and stops at the first point below `theta`.
///
/// Points are evaluated in parallel batches of `batch` so the early exit
/// wastes at most one batch.
pub fn stabilization_scan(
    spec: &ChainSpec,
    protocol: Protocol,
    j0: f64,
    t_star_grid: &[f64],
    theta: f64,
    options: &EvolveOptions,
) -> Result<Option<f64>> {
    check_grid("t_star_grid", t_star_grid)?;
    let batch = rayon::current_num_threads().max(1);
    let mut hi = t_star_grid.len();
    while hi > 0 {
        let lo = hi.saturating_sub(batch);
        let f = t_star_grid[lo..hi]
            .par_iter()
            .map(|&t| fidelity_at(spec, protocol, j0, t, options))
            .collect::<Result<Vec<_>>>()?;
        if let Some(k) = f.iter().rposition(|&x| x < theta) {
            let first_ok = lo + k + 1;
            return Ok((first_ok < t_star_grid.len()).then(|| t_star_grid[first_ok]));
        }
        hi = lo;
    }
    Ok(Some(t_star_grid[0]))
}

/// Fidelity over an `(alpha, t*)` grid for the exponential protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub alpha_grid: Vec<f64>,
    pub t_star_grid: Vec<f64>,
    /// `fidelity[i][j]` at `alpha_grid[i]`, `t_star_grid[j]`.
    pub fidelity: Vec<Vec<f64>>,
}

pub const CONTOUR_LEVELS: [f64; 2] = [0.9, 0.99];

impl PhaseDiagram {
    /// Linear-interpolated times at which each row crosses `theta`.
    pub fn contour(&self, theta: f64) -> Vec<Vec<f64>> {
        self.fidelity
            .iter()
            .map(|row| {
                let t = &self.t_star_grid;
                (1..row.len())
                    .filter(|&j| (row[j - 1] < theta) != (row[j] < theta))
                    .map(|j| t[j - 1] + (theta - row[j - 1]) / (row[j] - row[j - 1]) * (t[j] - t[j - 1]))
                    .collect()
            })
            .collect()
    }

    /// Stabilization time of every row.
    pub fn stabilization_times(&self, theta: f64) -> Vec<Option<f64>> {
        self.fidelity
            .iter()
            .map(|row| stabilization_index(row, theta).map(|j| self.t_star_grid[j]))
            .collect()
    }

    /// The alpha with the smallest stabilization time; ties go to the
    /// smaller alpha.
    pub fn optimal_alpha(&self, theta: f64) -> Option<(f64, f64)> {
        best_alpha(&self.alpha_grid, &self.stabilization_times(theta))
    }
}

fn best_alpha(alphas: &[f64], times: &[Option<f64>]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for (&a, t) in alphas.iter().zip(times) {
        if let Some(t) = *t {
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((a, t));
            }
        }
    }
    best
}

pub fn alpha_phase_diagram(
    spec: &ChainSpec,
    alpha_grid: &[f64],
    t_star_grid: &[f64],
    options: &EvolveOptions,
) -> Result<PhaseDiagram> {
    check_grid("alpha_grid", alpha_grid)?;
    check_grid("t_star_grid", t_star_grid)?;
    let nt = t_star_grid.len();
    let flat = (0..alpha_grid.len() * nt)
        .into_par_iter()
        .map(|k| fidelity_at(spec, exponential(alpha_grid[k / nt]), 1.0, t_star_grid[k % nt], options))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram {
        alpha_grid: alpha_grid.to_vec(),
        t_star_grid: t_star_grid.to_vec(),
        fidelity: flat.chunks(nt).map(<[f64]>::to_vec).collect(),
    })
}

fn exponential(alpha: f64) -> Protocol {
    Protocol::Exponential {
        alpha,
        vb: Default::default(),
    }
}

/// `(alpha_opt, t*_theta(alpha_opt))` minimizing the stabilization time over
/// `alpha_grid`, ties toward smaller alpha. Each row is scanned from the top
/// of `t_star_grid` down and stops at its first failure.
pub fn optimal_alpha(
    spec: &ChainSpec,
    alpha_grid: &[f64],
    t_star_grid: &[f64],
    theta: f64,
    options: &EvolveOptions,
) -> Result<(f64, f64)> {
    check_grid("alpha_grid", alpha_grid)?;
    let times = alpha_grid
        .iter()
        .map(|&a| stabilization_scan(spec, exponential(a), 1.0, t_star_grid, theta, options))
        .collect::<Result<Vec<_>>>()?;
    best_alpha(alpha_grid, &times).ok_or_else(|| {
        invalid(
            "alpha_grid",
            format!("no alpha stabilizes above {theta} within t* <= {}", t_star_grid[t_star_grid.len() - 1]),
        )
    })
}

/// Summary of an ensemble of final fidelities (and end-site phase
/// differences where defined).
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    /// The swept value: disorder strength, loss rate or total time.
    pub parameter: f64,
    pub mean: f64,
    /// Sample standard deviation (`n - 1`); zero for a single sample.
    pub std: f64,
    pub count: usize,
    pub mean_phase: f64,
    pub mean_abs_phase: f64,
    pub std_abs_phase: f64,
    /// Members whose phase difference was defined.
    pub phase_count: usize,
    pub mean_norm_sqr: f64,
    pub fidelities: Vec<f64>,
    pub phases: Vec<Option<f64>>,
}

impl EnsembleStats {
    fn from_samples(parameter: f64, samples: &[Sample]) -> Self {
        Self::from_members(
            parameter,
            samples.iter().map(|s| s.fidelity).collect(),
            samples.iter().map(|s| s.phase).collect(),
            &samples.iter().map(|s| s.norm_sqr).collect::<Vec<_>>(),
        )
    }

    /// Statistics from per-member fidelities, phase differences and final
    /// squared norms, all in member order.
    pub fn from_members(parameter: f64, fidelities: Vec<f64>, phases: Vec<Option<f64>>, norms: &[f64]) -> Self {
        let defined: Vec<f64> = phases.iter().flatten().copied().collect();
        let abs: Vec<f64> = defined.iter().map(|p| p.abs()).collect();
        Self {
            parameter,
            mean: mean(&fidelities),
            std: sample_std(&fidelities),
            count: fidelities.len(),
            mean_phase: mean(&defined),
            mean_abs_phase: mean(&abs),
            std_abs_phase: sample_std(&abs),
            phase_count: defined.len(),
            mean_norm_sqr: mean(norms),
            fidelities,
            phases,
        }
    }

    /// `std / sqrt(count)`.
    pub fn standard_error(&self) -> f64 {
        self.std / (self.count as f64).sqrt()
    }

    pub fn abs_phase_standard_error(&self) -> f64 {
        if self.phase_count == 0 {
            f64::NAN
        } else {
            self.std_abs_phase / (self.phase_count as f64).sqrt()
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        f64::NAN
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

struct Sample {
    fidelity: f64,
    phase: Option<f64>,
    norm_sqr: f64,
}

fn run_sample(spec: &ChainSpec, schedule: &DriveSchedule, options: EvolveOptions) -> Result<Sample> {
    let r = evolve(spec, schedule, &options)?;
    Ok(Sample {
        fidelity: r.fidelity,
        phase: r.phase_difference(spec).ok(),
        norm_sqr: r.final_state.norm_sqr(),
    })
}

/// Collect per-member results in index order; any failure turns the whole
/// ensemble into an error listing every failed index.
fn gather(results: Vec<Result<Sample>>) -> Result<Vec<Sample>> {
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    if failures.is_empty() {
        Ok(ok)
    } else {
        Err(Error::EnsembleFailures { failures })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    pub symmetry: DisorderSymmetry,
    pub strength: f64,
    pub granularity: Granularity,
}

/// `m` disorder realizations with seeds derived from `(master_seed, index)`.
/// Results do not depend on the number of worker threads.
pub fn disorder_ensemble(
    spec: &ChainSpec,
    schedule: &DriveSchedule,
    disorder: &DisorderSpec,
    m: usize,
    master_seed: u64,
    options: &EvolveOptions,
) -> Result<EnsembleStats> {
    if m == 0 {
        return Err(invalid("m", "ensemble needs at least one realization"));
    }
    let results = (0..m)
        .into_par_iter()
        .map(|i| {
            let seed = realization_seed(master_seed, i as u64);
            let realization = sample_disorder(
                spec,
                disorder.kind,
                disorder.symmetry,
                disorder.strength,
                seed,
                disorder.granularity,
            )?;
            run_sample(
                spec,
                schedule,
                EvolveOptions {
                    disorder: Some(realization),
                    frames: 0,
                    ..options.clone()
                },
            )
        })
        .collect::<Vec<_>>();
    Ok(EnsembleStats::from_samples(disorder.strength, &gather(results)?))
}

/// How loss rates are distributed over the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossMode {
    Uniform,
    /// b-site offsets `delta` drawn uniformly from `[-0.1, 0.1]` per region,
    /// `samples` draws per rate.
    Asymmetric { samples: usize, master_seed: u64 },
}

/// Final fidelity per loss rate.
pub fn loss_sweep(
    spec: &ChainSpec,
    schedule: &DriveSchedule,
    gamma_grid: &[f64],
    mode: LossMode,
    options: &EvolveOptions,
) -> Result<Vec<EnsembleStats>> {
    if gamma_grid.is_empty() {
        return Err(invalid("gamma_grid", "empty grid"));
    }
    gamma_grid
        .iter()
        .map(|&gamma| {
            let models: Vec<LossModel> = match mode {
                LossMode::Uniform => vec![LossModel::uniform(spec, gamma)?],
                LossMode::Asymmetric { samples, master_seed } => {
                    if samples == 0 {
                        return Err(invalid("samples", "need at least one draw"));
                    }
                    (0..samples)
                        .map(|i| LossModel::asymmetric(spec, gamma, &loss_offsets(spec, master_seed, i as u64)))
                        .collect::<Result<_>>()?
                }
            };
            let results = models
                .into_par_iter()
                .map(|loss| {
                    run_sample(
                        spec,
                        schedule,
                        EvolveOptions {
                            loss: Some(loss),
                            frames: 0,
                            ..options.clone()
                        },
                    )
                })
                .collect::<Vec<_>>();
            Ok(EnsembleStats::from_samples(gamma, &gather(results)?))
        })
        .collect()
}

/// Per-region loss offsets for draw `index`, uniform in `[-0.1, 0.1]`.
pub fn loss_offsets(spec: &ChainSpec, master_seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(realization_seed(master_seed, index));
    (0..spec.region_count()).map(|_| rng.random_range(-0.1..=0.1)).collect()
}

/// Optimal exponential parameter as a cubic in chain length.
pub fn reference_alpha(l: f64) -> f64 {
    1.2e-5 * l.powi(3) - 0.0026 * l * l + 0.22 * l - 0.33
}

/// Cosine-protocol time budget (units of `1/J0`) as a cubic in chain length.
pub fn cosine_budget(l: f64) -> f64 {
    0.1 * l.powi(3) - 0.46 * l * l + 28.0 * l - 260.0
}

/// Exponential-protocol time budget at the optimal alpha.
pub fn exponential_budget(l: f64) -> f64 {
    0.00052 * l.powi(3) + 0.059 * l * l - 0.34 * l + 68.0
}

/// Stabilization time of one chain in a size sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePoint {
    pub len: usize,
    pub branches: usize,
    pub protocol: Protocol,
    pub stabilization: Option<f64>,
}

/// Stabilization time per chain, with the protocol and `t*` grid chosen per
/// chain by the caller.
pub fn scalability_sweep<P, G>(
    specs: &[ChainSpec],
    protocol_for: P,
    grid_for: G,
    theta: f64,
    options: &EvolveOptions,
) -> Result<Vec<ScalePoint>>
where
    P: Fn(&ChainSpec) -> Protocol,
    G: Fn(&ChainSpec) -> Vec<f64>,
{
    specs
        .iter()
        .map(|spec| {
            let protocol = protocol_for(spec);
            let stabilization = stabilization_scan(spec, protocol, 1.0, &grid_for(spec), theta, options)?;
            Ok(ScalePoint {
                len: spec.len(),
                branches: spec.region_count(),
                protocol,
                stabilization,
            })
        })
        .collect()
}

/// Uniform grid `start, start + step, ...` up to `end` inclusive (within
/// rounding).
pub fn uniform_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(f: &[f64]) -> FidelityCurve {
        FidelityCurve {
            t_star_grid: (0..f.len()).map(|i| 10.0 * (i + 1) as f64).collect(),
            fidelity: f.to_vec(),
            protocol: "test".into(),
            spec: "test".into(),
        }
    }

    #[test]
    fn stabilization_ignores_early_crossings() {
        let c = curve(&[0.5, 0.995, 0.98, 0.991, 0.999, 0.993]);
        assert_eq!(stabilization_time(&c, 0.99), Some(40.0));
        assert_eq!(stabilization_time(&curve(&[1.0, 1.0]), 0.99), Some(10.0));
        assert_eq!(stabilization_time(&curve(&[0.999, 0.5]), 0.99), None);
    }

    #[test]
    fn stabilization_monotone_in_threshold() {
        let c = curve(&[0.5, 0.91, 0.95, 0.92, 0.995, 0.97, 0.999]);
        let mut prev = f64::INFINITY;
        for theta in [0.99, 0.96, 0.93, 0.9, 0.6] {
            let t = stabilization_time(&c, theta).unwrap_or(f64::INFINITY);
            assert!(t <= prev);
            prev = t;
        }
    }

    #[test]
    fn contour_interpolates() {
        let d = PhaseDiagram {
            alpha_grid: vec![1.0],
            t_star_grid: vec![0.0, 10.0, 20.0],
            fidelity: vec![vec![0.8, 1.0, 0.8]],
        };
        let c = d.contour(0.9);
        assert_eq!(c[0].len(), 2);
        assert!((c[0][0] - 5.0).abs() < 1e-12);
        assert!((c[0][1] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_alpha_breaks_ties_low() {
        let d = PhaseDiagram {
            alpha_grid: vec![1.0, 2.0, 3.0],
            t_star_grid: vec![1.0, 2.0],
            fidelity: vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]],
        };
        assert_eq!(d.optimal_alpha(0.99), Some((2.0, 1.0)));
    }

    #[test]
    fn grids_are_validated() {
        let spec = ChainSpec::interface(2).unwrap();
        let opts = EvolveOptions::final_only();
        assert!(fidelity_vs_time(&spec, Protocol::Cosine, 1.0, &[], &opts).is_err());
        assert!(fidelity_vs_time(&spec, Protocol::Cosine, 1.0, &[2.0, 1.0], &opts).is_err());
        assert!(alpha_phase_diagram(&spec, &[], &[1.0], &opts).is_err());
    }

    #[test]
    fn scan_matches_full_curve() {
        let spec = ChainSpec::interface(4).unwrap();
        let grid = uniform_grid(2.0, 40.0, 2.0);
        let opts = EvolveOptions::final_only();
        let p = exponential(3.0);
        let full = fidelity_vs_time(&spec, p, 1.0, &grid, &opts).unwrap();
        for theta in [0.5, 0.9, 0.99] {
            let scanned = stabilization_scan(&spec, p, 1.0, &grid, theta, &opts).unwrap();
            assert_eq!(scanned, stabilization_time(&full, theta));
        }
    }

    #[test]
    fn zero_disorder_reproduces_clean_run() {
        let spec = ChainSpec::interface(4).unwrap();
        let schedule = DriveSchedule::exponential(1.0, 20.0, 3.0).unwrap();
        let clean = evolve(&spec, &schedule, &EvolveOptions::final_only()).unwrap().fidelity;
        let d = DisorderSpec {
            kind: DisorderKind::Diagonal,
            symmetry: DisorderSymmetry::MirrorSymmetric,
            strength: 0.0,
            granularity: Granularity::PerSite,
        };
        let stats = disorder_ensemble(&spec, &schedule, &d, 5, 1, &EvolveOptions::final_only()).unwrap();
        assert_eq!(stats.mean, clean);
        assert_eq!(stats.std, 0.0);
        assert_eq!(stats.count, 5);
    }

    #[test]
    fn ensemble_is_deterministic() {
        let spec = ChainSpec::interface(4).unwrap();
        let schedule = DriveSchedule::cosine(1.0, 20.0).unwrap();
        let d = DisorderSpec {
            kind: DisorderKind::OffDiagonal,
            symmetry: DisorderSymmetry::Asymmetric,
            strength: 0.3,
            granularity: Granularity::PerSite,
        };
        let a = disorder_ensemble(&spec, &schedule, &d, 6, 9, &EvolveOptions::final_only()).unwrap();
        let b = disorder_ensemble(&spec, &schedule, &d, 6, 9, &EvolveOptions::final_only()).unwrap();
        assert_eq!(a, b);
        assert!(a.std > 0.0);
    }

    #[test]
    fn ensemble_reports_failures() {
        let spec = ChainSpec::interface(4).unwrap();
        let schedule = DriveSchedule::cosine(1.0, 20.0).unwrap();
        let d = DisorderSpec {
            kind: DisorderKind::Diagonal,
            symmetry: DisorderSymmetry::MirrorSymmetric,
            strength: 0.1,
            granularity: Granularity::PerSite,
        };
        let opts = EvolveOptions {
            dt: Some(1.0),
            ..EvolveOptions::final_only()
        };
        match disorder_ensemble(&spec, &schedule, &d, 3, 0, &opts) {
            Err(Error::EnsembleFailures { failures }) => {
                assert_eq!(failures.iter().map(|f| f.0).collect::<Vec<_>>(), vec![0, 1, 2]);
            }
            other => panic!("expected failures, got {other:?}"),
        }
    }

    #[test]
    fn zero_loss_matches_clean() {
        let spec = ChainSpec::interface(4).unwrap();
        let schedule = DriveSchedule::exponential(1.0, 20.0, 3.0).unwrap();
        let clean = evolve(&spec, &schedule, &EvolveOptions::final_only()).unwrap().fidelity;
        let s = loss_sweep(&spec, &schedule, &[0.0], LossMode::Uniform, &EvolveOptions::final_only()).unwrap();
        assert_eq!(s[0].mean, clean);
    }

    #[test]
    fn budgets_at_reference_size() {
        assert!((cosine_budget(21.0) - 1051.24).abs() < 1e-9);
        assert!((exponential_budget(21.0) - 91.69472).abs() < 1e-9);
        assert!((reference_alpha(21.0) - 3.254532).abs() < 1e-9);
    }

    #[test]
    fn uniform_grid_includes_end() {
        assert_eq!(uniform_grid(1.0, 2.0, 0.5), vec![1.0, 1.5, 2.0]);
        assert_eq!(uniform_grid(0.0, 0.3, 0.1).len(), 4);
    }
}
