use proptest::prelude::*;

use topopump::experiments::{
    cubic_fit, disorder_ensemble, fidelity_vs_time, stabilization_scan, stabilization_time, DisorderSpec,
};
use topopump::lattice::{Granularity, HamiltonianMatrix, SiteCouplings};
use topopump::protocol::{realization_seed, sample_disorder};
use topopump::{
    evolve, ChainSpec, CouplingPoint, DisorderKind, DisorderSymmetry, DriveSchedule, EvolveOptions, FidelityCurve,
    Protocol, VbProfile,
};

fn schedule(kind: u8, t_star: f64, alpha: f64) -> DriveSchedule {
    match kind {
        0 => DriveSchedule::cosine(1.0, t_star).unwrap(),
        1 => DriveSchedule::exponential(1.0, t_star, alpha).unwrap(),
        _ => DriveSchedule::new(
            Protocol::Exponential {
                alpha,
                vb: VbProfile::TimeSymmetric,
            },
            1.0,
            t_star,
        )
        .unwrap(),
    }
}

fn kind_strategy() -> impl Strategy<Value = DisorderKind> {
    prop_oneof![Just(DisorderKind::Diagonal), Just(DisorderKind::OffDiagonal)]
}

fn symmetry_strategy() -> impl Strategy<Value = DisorderSymmetry> {
    prop_oneof![Just(DisorderSymmetry::MirrorSymmetric), Just(DisorderSymmetry::Asymmetric)]
}

proptest! {
    #[test]
    fn couplings_are_mirror_images_in_time(
        kind in 0u8..3, t_star in 1.0f64..2000.0, frac in 0.0f64..=1.0, alpha in 0.1f64..10.0
    ) {
        let s = schedule(kind, t_star, alpha);
        let t = frac * t_star;
        let a = s.at(t).unwrap();
        let b = s.at(t_star - t).unwrap();
        prop_assert!((a.j1 - b.j2).abs() <= 1e-12);
        prop_assert!((a.j2 - b.j1).abs() <= 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences(
        kind in 0u8..3, t_star in 10.0f64..2000.0, frac in 0.05f64..0.95, alpha in 0.5f64..8.0
    ) {
        let s = schedule(kind, t_star, alpha);
        let t = frac * t_star;
        // Skip the kink of the time-symmetric profile.
        prop_assume!(kind != 2 || (frac - 0.5).abs() > 0.01);
        let h = 1e-5 * t_star;
        let (lo, mid, hi) = (s.at(t - h).unwrap(), s.at(t).unwrap(), s.at(t + h).unwrap());
        let fd = |f: fn(&CouplingPoint) -> f64| (f(&hi) - f(&lo)) / (2.0 * h);
        // Rates scale as 1/t*.
        let close = |exact: f64, approx: f64| (exact - approx).abs() <= 1e-6 * (exact.abs() + 1.0 / t_star);
        prop_assert!(close(mid.dj1_dt, fd(|c| c.j1)), "dJ1 {} vs {}", mid.dj1_dt, fd(|c| c.j1));
        prop_assert!(close(mid.dj2_dt, fd(|c| c.j2)));
        prop_assert!(close(mid.dva_dt, fd(|c| c.va)));
        prop_assert!(close(mid.dvb_dt, fd(|c| c.vb)), "dVb {} vs {}", mid.dvb_dt, fd(|c| c.vb));
    }

    #[test]
    fn intracell_hopping_falls_and_intercell_rises(
        kind in 0u8..2, t_star in 1.0f64..2000.0, f1 in 0.0f64..=1.0, f2 in 0.0f64..=1.0, alpha in 0.1f64..10.0
    ) {
        let s = schedule(kind, t_star, alpha);
        let (a, b) = (f1.min(f2) * t_star, f1.max(f2) * t_star);
        let (ca, cb) = (s.at(a).unwrap(), s.at(b).unwrap());
        prop_assert!(cb.j1 <= ca.j1 + 1e-15);
        prop_assert!(cb.j2 >= ca.j2 - 1e-15);
        prop_assert!(ca.j1 >= -1e-15 && ca.j2 >= -1e-15);
    }

    #[test]
    fn disordered_hamiltonians_are_hermitian(
        router in any::<bool>(), half in 1usize..6,
        j1 in 0.0f64..2.0, j2 in 0.0f64..2.0, va in -1.0f64..1.0,
        kind in kind_strategy(), symmetry in symmetry_strategy(),
        strength in 0.0f64..0.9, seed in any::<u64>(),
    ) {
        let spec = if router {
            ChainSpec::router(3, 2 * half).unwrap()
        } else {
            ChainSpec::interface(2 * half).unwrap()
        };
        let r = sample_disorder(&spec, kind, symmetry, strength, seed, Granularity::PerSite).unwrap();
        prop_assert!(r.check(&spec).is_ok());
        let table = SiteCouplings::at(&spec, &CouplingPoint::rice_mele(j1, j2, va), Some(&r)).unwrap();
        let h = HamiltonianMatrix::from_couplings(&spec, &table).unwrap();
        prop_assert!(h.hermiticity_error() <= 1e-12);
    }

    #[test]
    fn mirror_disorder_is_mirror_symmetric(
        half in 1usize..8, kind in kind_strategy(), strength in 0.0f64..0.9, seed in any::<u64>(),
        global in any::<bool>(),
    ) {
        let spec = ChainSpec::interface(2 * half).unwrap();
        let g = if global { Granularity::Global } else { Granularity::PerSite };
        let r = sample_disorder(&spec, kind, DisorderSymmetry::MirrorSymmetric, strength, seed, g).unwrap();
        let perm = spec.mirror_permutation();
        for (s, &m) in perm.iter().enumerate() {
            prop_assert_eq!(r.site_factors[s], r.site_factors[m]);
        }
        for b in 0..spec.bonds().len() {
            let cls = spec.bond_mirror_class(b);
            for b2 in 0..spec.bonds().len() {
                if spec.bond_mirror_class(b2) == cls {
                    prop_assert_eq!(r.bond_factors[b], r.bond_factors[b2]);
                }
            }
        }
    }

    #[test]
    fn stabilization_time_is_monotone_in_threshold(
        fidelity in prop::collection::vec(0.0f64..=1.0, 1..40), th1 in 0.0f64..=1.0, th2 in 0.0f64..=1.0
    ) {
        let curve = FidelityCurve {
            t_star_grid: (0..fidelity.len()).map(|i| i as f64).collect(),
            fidelity,
            protocol: "synthetic".into(),
            spec: "none".into(),
        };
        let (lo, hi) = (th1.min(th2), th1.max(th2));
        let key = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
        prop_assert!(key(stabilization_time(&curve, lo)) <= key(stabilization_time(&curve, hi)));
        if let Some(t) = stabilization_time(&curve, hi) {
            let i = t as usize;
            prop_assert!(curve.fidelity[i..].iter().all(|&f| f >= hi));
            prop_assert!(i == 0 || curve.fidelity[i - 1] < hi);
        }
    }

    #[test]
    fn cubic_residuals_are_orthogonal_to_the_basis(
        ys in prop::collection::vec(-1e4f64..1e4, 5..25), x0 in 1.0f64..100.0, dx in 0.5f64..20.0
    ) {
        let xs: Vec<f64> = (0..ys.len()).map(|i| x0 + dx * i as f64).collect();
        let fit = cubic_fit(&xs, &ys).unwrap();
        prop_assert!(fit.normal_equation_error() < 1e-8, "{}", fit.normal_equation_error());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lossless_evolution_conserves_the_norm(
        half in 1usize..4, t_star in 5.0f64..60.0, kind in 0u8..2, alpha in 1.0f64..6.0
    ) {
        let spec = ChainSpec::interface(2 * half).unwrap();
        let r = evolve(&spec, &schedule(kind, t_star, alpha), &EvolveOptions::final_only()).unwrap();
        prop_assert!(r.max_norm_drift < 1e-8);
        prop_assert!((0.0..=1.0 + 1e-9).contains(&r.fidelity));
    }
}

/// Kolmogorov-Smirnov test of the global off-diagonal draws against
/// `U[-w, w]`. Seeds are fixed, so the outcome is deterministic.
#[test]
fn disorder_offsets_are_uniform() {
    let spec = ChainSpec::interface(10).unwrap();
    let w = 0.4;
    let mut draws: Vec<f64> = (0..4000u64)
        .map(|i| {
            let r = sample_disorder(
                &spec,
                DisorderKind::OffDiagonal,
                DisorderSymmetry::MirrorSymmetric,
                w,
                realization_seed(99, i),
                Granularity::Global,
            )
            .unwrap();
            r.bond_factors[0] - 1.0
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let d = draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = (x + w) / (2.0 * w);
            (cdf - i as f64 / n).abs().max((cdf - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    // 0.1% critical value.
    assert!(d < 1.95 / n.sqrt(), "KS statistic {d}");
    assert!(draws[0] >= -w && draws[draws.len() - 1] <= w);
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let spec = ChainSpec::interface(4).unwrap();
    let sched = DriveSchedule::exponential(1.0, 25.0, 3.0).unwrap();
    let d = DisorderSpec {
        kind: DisorderKind::OffDiagonal,
        symmetry: DisorderSymmetry::Asymmetric,
        strength: 0.3,
        granularity: Granularity::Global,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| disorder_ensemble(&spec, &sched, &d, 9, 5, &EvolveOptions::final_only()).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.fidelities), bits(&b.fidelities));
    assert!(a.std > 0.0);
}

#[test]
fn early_exit_scan_matches_full_curve() {
    let spec = ChainSpec::interface(4).unwrap();
    let grid: Vec<f64> = (1..=30).map(|i| 2.0 * i as f64).collect();
    let opts = EvolveOptions::final_only();
    for protocol in [
        Protocol::Cosine,
        Protocol::Exponential {
            alpha: 2.0,
            vb: VbProfile::AsPrinted,
        },
    ] {
        let curve = fidelity_vs_time(&spec, protocol, 1.0, &grid, &opts).unwrap();
        for theta in [0.5, 0.9, 0.99, 0.999] {
            let scan = stabilization_scan(&spec, protocol, 1.0, &grid, theta, &opts).unwrap();
            assert_eq!(scan, stabilization_time(&curve, theta), "{protocol:?} theta {theta}");
        }
    }
}
