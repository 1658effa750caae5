use topopump::experiments::{
    cosine_budget, cubic_fit, exponential_budget, fidelity_at, loss_offsets, reference_alpha, stabilization_scan,
    stabilization_time, DisorderSpec, CONTOUR_LEVELS,
};
use topopump::lattice::build_hamiltonian;
use topopump::protocol::{realization_seed, sample_disorder};
use topopump::spectral::{d_vector, dispersion, eigh, gap_tracking, winding_number, GapTrackOptions};
use topopump::{
    evolve, ChainSpec, CouplingPoint, DriveSchedule, EnsembleStats, EvolveOptions, FidelityCurve, LossModel,
    PhaseDiagram, Protocol, Topology,
};

use crate::config::{EnsembleMode, LossKind, RunConfig, SweepMode};
use crate::error::CliError;
use crate::output::{opt, unopt, Cell, RunDir, Table};

fn evolve_options(cfg: &RunConfig) -> EvolveOptions {
    EvolveOptions {
        dt: cfg.numerics.dt,
        frames: cfg.numerics.frames,
        ..EvolveOptions::default()
    }
}

fn final_only(cfg: &RunConfig) -> EvolveOptions {
    EvolveOptions {
        frames: 0,
        ..evolve_options(cfg)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn spectrum(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let spec = cfg.chain.spec()?;
    let sc = &cfg.spectrum;

    let mut static_table = Table::new("spectrum_vs_j1", &["j1", "j2", "index", "energy"]);
    for j1 in sc.j1.values("spectrum.j1")? {
        let snap = eigh(&build_hamiltonian(&spec, &CouplingPoint::ssh(j1, sc.j2))?)?;
        for (i, e) in snap.eigenvalues.iter().enumerate() {
            static_table.push(vec![j1.into(), sc.j2.into(), i.into(), (*e).into()]);
        }
    }
    run.write(&static_table)?;

    let schedule = cfg.protocol.schedule()?;
    let times = linspace(0.0, schedule.t_star, sc.time_samples);
    let track = match spec.topology() {
        Topology::EvenSsh => None,
        _ => Some(gap_tracking(&spec, &schedule, &times, &GapTrackOptions::default())?),
    };
    let mut inst = Table::new("instantaneous_spectrum", &["t", "index", "energy", "gap_state"]);
    let mut density = Table::new("gap_state_density", &["t", "site", "density"]);
    for (k, &t) in times.iter().enumerate() {
        let snap = eigh(&build_hamiltonian(&spec, &schedule.at(t)?)?)?;
        let gap_idx = track.as_ref().map(|tr| snap.best_overlap(&tr.states[k]).0);
        for (i, e) in snap.eigenvalues.iter().enumerate() {
            let flag = match gap_idx {
                Some(g) => Cell::U((g == i) as u64),
                None => Cell::Missing,
            };
            inst.push(vec![t.into(), i.into(), (*e).into(), flag]);
        }
        if let Some(tr) = &track {
            for (s, p) in tr.states[k].populations().iter().enumerate() {
                density.push(vec![t.into(), s.into(), (*p).into()]);
            }
        }
    }
    run.write(&inst)?;
    if track.is_some() {
        run.write(&density)?;

        let alphas = sc.alphas.values("spectrum.alphas")?;
        let store = run.points("min-gap")?;
        let rows = store.compute(alphas.len(), |i| {
            let sched = DriveSchedule::new(
                Protocol::Exponential {
                    alpha: alphas[i],
                    vb: cfg.protocol.vb,
                },
                cfg.protocol.j0,
                schedule.t_star,
            )?;
            let tr = gap_tracking(&spec, &sched, &times, &GapTrackOptions::default())?;
            Ok(vec![tr.min_gap, tr.min_gap_time])
        })?;
        let mut gaps = Table::new("min_gap_vs_alpha", &["alpha", "min_gap", "t_at_min"]);
        for (a, r) in alphas.iter().zip(&rows) {
            gaps.push(vec![(*a).into(), r[0].into(), r[1].into()]);
        }
        run.write(&gaps)?;
    }

    let mut disp = Table::new("dispersion", &["j1", "j2", "k", "e_lower", "e_upper", "dx", "dy", "dz"]);
    for &[j1, j2] in &sc.bloch_points {
        let c = CouplingPoint::ssh(j1, j2);
        for k in linspace(-std::f64::consts::PI, std::f64::consts::PI, sc.k_samples) {
            let (lo, hi) = dispersion(k, &c);
            let d = d_vector(k, &c);
            disp.push(vec![j1.into(), j2.into(), k.into(), lo.into(), hi.into(), d.dx.into(), d.dy.into(), d.dz.into()]);
        }
    }
    run.write(&disp)?;
    println!(
        "spectrum: L = {}, {} J1 values, {} times",
        spec.len(),
        static_table.rows.len() / spec.len(),
        times.len()
    );
    Ok(())
}

pub fn winding(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let mut table = Table::new("winding", &["j1", "j2", "winding", "raw"]);
    for &[j1, j2] in &cfg.spectrum.bloch_points {
        match winding_number(&CouplingPoint::ssh(j1, j2), cfg.numerics.n_k) {
            Ok(w) => {
                println!("J1 = {j1}, J2 = {j2}: W = {} (raw {:.12})", w.value, w.raw);
                table.push(vec![j1.into(), j2.into(), w.value.into(), w.raw.into()]);
            }
            Err(e) => {
                println!("J1 = {j1}, J2 = {j2}: {e}");
                table.push(vec![j1.into(), j2.into(), Cell::Missing, Cell::Missing]);
            }
        }
    }
    run.write(&table)?;
    Ok(())
}

fn end_table(name: &str, spec: &ChainSpec, state: &topopump::StateVector) -> Table {
    let mut t = Table::new(name, &["port", "site", "population", "phase"]);
    let amps = state.amplitudes();
    for (port, &s) in spec.end_sites().iter().enumerate() {
        t.push(vec![port.into(), s.into(), amps[s].norm_sqr().into(), amps[s].arg().into()]);
    }
    t
}

pub fn evolve_cmd(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let spec = cfg.chain.spec()?;
    let schedule = cfg.protocol.schedule()?;
    let r = evolve(&spec, &schedule, &evolve_options(cfg))?;

    let mut pops = Table::new("populations", &["t", "site", "population"]);
    let mut norms = Table::new("norms", &["t", "norm"]);
    for (k, &t) in r.frame_times.iter().enumerate() {
        for (s, p) in r.populations[k].iter().enumerate() {
            pops.push(vec![t.into(), s.into(), (*p).into()]);
        }
        norms.push(vec![t.into(), r.norms[k].into()]);
    }
    run.write(&pops)?;
    run.write(&norms)?;

    let mut fin = Table::new("final_state", &["site", "re", "im", "population", "phase"]);
    for (s, a) in r.final_state.amplitudes().iter().enumerate() {
        fin.push(vec![s.into(), a.re.into(), a.im.into(), a.norm_sqr().into(), a.arg().into()]);
    }
    run.write(&fin)?;
    run.write(&end_table("ports", &spec, &r.final_state))?;

    let phase = r.phase_difference(&spec).ok();
    let mut summary = Table::new(
        "summary",
        &["t_star", "fidelity", "norm_sqr", "max_norm_drift", "phase_difference", "dt", "steps"],
    );
    summary.push(vec![
        schedule.t_star.into(),
        r.fidelity.into(),
        r.final_state.norm_sqr().into(),
        r.max_norm_drift.into(),
        phase.into(),
        r.dt.into(),
        r.steps.into(),
    ]);
    run.write(&summary)?;

    println!(
        "{} on {} (L = {}), t* = {}: fidelity {:.6}, norm drift {:.2e}, dt {}, {} steps",
        schedule.protocol.name(),
        spec.topology().name(),
        spec.len(),
        schedule.t_star,
        r.fidelity,
        r.max_norm_drift,
        r.dt,
        r.steps
    );
    if let Some(p) = phase {
        println!("end-site phase difference {p:.3e}");
    }
    Ok(())
}

fn theta_levels(theta: f64) -> Vec<f64> {
    let mut v: Vec<f64> = CONTOUR_LEVELS.to_vec();
    if !v.contains(&theta) {
        v.push(theta);
    }
    v.sort_by(f64::total_cmp);
    v
}

fn exponential(cfg: &RunConfig, alpha: f64) -> Protocol {
    Protocol::Exponential {
        alpha,
        vb: cfg.protocol.vb,
    }
}

pub fn sweep(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let spec = cfg.chain.spec()?;
    let sw = &cfg.sweep;
    let opts = final_only(cfg);
    let j0 = cfg.protocol.schedule()?.j0;
    match sw.mode {
        SweepMode::Fidelity => {
            let grid = sw.t_star.values("sweep.t_star")?;
            let protocol = cfg.protocol.protocol()?;
            let store = run.points("fidelity")?;
            let rows = store.compute(grid.len(), |i| Ok(vec![fidelity_at(&spec, protocol, j0, grid[i], &opts)?]))?;
            let curve = FidelityCurve {
                t_star_grid: grid.clone(),
                fidelity: rows.iter().map(|r| r[0]).collect(),
                protocol: protocol.name().into(),
                spec: spec.topology().name().into(),
            };
            let mut t = Table::new("fidelity_curve", &["t_star", "fidelity"]);
            for (x, f) in grid.iter().zip(&curve.fidelity) {
                t.push(vec![(*x).into(), (*f).into()]);
            }
            run.write(&t)?;
            let mut st = Table::new("stabilization", &["theta", "t_star_stable"]);
            for th in theta_levels(sw.theta) {
                let ts = stabilization_time(&curve, th);
                println!("{}: F >= {th} from t* = {}", protocol.name(), fmt_opt(ts));
                st.push(vec![th.into(), ts.into()]);
            }
            run.write(&st)?;
        }
        SweepMode::PhaseDiagram => {
            let alphas = sw.alpha.values("sweep.alpha")?;
            let grid = sw.t_star.values("sweep.t_star")?;
            let nt = grid.len();
            let store = run.points("phase-diagram")?;
            let rows = store.compute(alphas.len() * nt, |i| {
                Ok(vec![fidelity_at(&spec, exponential(cfg, alphas[i / nt]), j0, grid[i % nt], &opts)?])
            })?;
            let diagram = PhaseDiagram {
                alpha_grid: alphas.clone(),
                t_star_grid: grid.clone(),
                fidelity: rows.chunks(nt).map(|c| c.iter().map(|r| r[0]).collect()).collect(),
            };
            let mut t = Table::new("phase_diagram", &["alpha", "t_star", "fidelity"]);
            for (a, row) in alphas.iter().zip(&diagram.fidelity) {
                for (x, f) in grid.iter().zip(row) {
                    t.push(vec![(*a).into(), (*x).into(), (*f).into()]);
                }
            }
            run.write(&t)?;
            let mut ct = Table::new("contours", &["level", "alpha", "crossing", "t_star"]);
            for level in CONTOUR_LEVELS {
                for (a, crossings) in alphas.iter().zip(diagram.contour(level)) {
                    for (k, x) in crossings.iter().enumerate() {
                        ct.push(vec![level.into(), (*a).into(), k.into(), (*x).into()]);
                    }
                }
            }
            run.write(&ct)?;
            let mut st = Table::new("stabilization", &["theta", "alpha", "t_star_stable"]);
            let mut best = Table::new("optimal_alpha", &["theta", "alpha", "t_star_stable"]);
            for th in theta_levels(sw.theta) {
                for (a, ts) in alphas.iter().zip(diagram.stabilization_times(th)) {
                    st.push(vec![th.into(), (*a).into(), ts.into()]);
                }
                let opt = diagram.optimal_alpha(th);
                println!(
                    "F >= {th}: optimal alpha {} at t* = {}",
                    fmt_opt(opt.map(|o| o.0)),
                    fmt_opt(opt.map(|o| o.1))
                );
                best.push(vec![th.into(), opt.map(|o| o.0).into(), opt.map(|o| o.1).into()]);
            }
            run.write(&st)?;
            run.write(&best)?;
        }
        SweepMode::OptimalAlpha => {
            let alphas = sw.alpha.values("sweep.alpha")?;
            let grid = sw.t_star.values("sweep.t_star")?;
            let store = run.points("optimal-alpha")?;
            let rows = store.compute(alphas.len(), |i| {
                let ts = stabilization_scan(&spec, exponential(cfg, alphas[i]), j0, &grid, sw.theta, &opts)?;
                Ok(vec![opt(ts)])
            })?;
            let mut t = Table::new("stabilization", &["theta", "alpha", "t_star_stable"]);
            let mut best: Option<(f64, f64)> = None;
            for (a, r) in alphas.iter().zip(&rows) {
                let ts = unopt(r[0]);
                t.push(vec![sw.theta.into(), (*a).into(), ts.into()]);
                if let Some(ts) = ts {
                    if best.is_none_or(|(_, b)| ts < b) {
                        best = Some((*a, ts));
                    }
                }
            }
            run.write(&t)?;
            let mut b = Table::new("optimal_alpha", &["theta", "alpha", "t_star_stable"]);
            b.push(vec![sw.theta.into(), best.map(|o| o.0).into(), best.map(|o| o.1).into()]);
            run.write(&b)?;
            println!(
                "F >= {}: optimal alpha {} at t* = {}",
                sw.theta,
                fmt_opt(best.map(|o| o.0)),
                fmt_opt(best.map(|o| o.1))
            );
        }
        SweepMode::Scalability => {
            let specs = sw
                .sizes
                .iter()
                .map(|&n| ChainSpec::interface(n).map_err(|e| CliError::Config(format!("sweep.sizes: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if specs.is_empty() {
                return Err(CliError::Config("sweep.sizes is empty".into()));
            }
            let [lo, hi] = sw.scale_span;
            let store = run.points("scalability")?;
            // Point 2i is the cosine run on specs[i], 2i + 1 the exponential one.
            let rows = store.compute(2 * specs.len(), |i| {
                let spec = &specs[i / 2];
                let l = spec.len() as f64;
                let (protocol, budget) = if i % 2 == 0 {
                    (Protocol::Cosine, cosine_budget(l))
                } else {
                    (exponential(cfg, reference_alpha(l)), exponential_budget(l))
                };
                let grid = linspace(lo * budget, hi * budget, sw.scale_points);
                let ts = stabilization_scan(spec, protocol, 1.0, &grid, sw.theta, &opts)?;
                Ok(vec![opt(ts), budget])
            })?;
            for (k, name) in [(0, "cosine"), (1, "exponential")] {
                let mut t = Table::new(
                    &format!("scalability_{name}"),
                    &["n", "len", "alpha", "t_star_stable", "budget"],
                );
                for (i, spec) in specs.iter().enumerate() {
                    let r = &rows[2 * i + k];
                    let l = spec.len() as f64;
                    let alpha = if k == 1 { Some(reference_alpha(l)) } else { None };
                    t.push(vec![
                        spec.n().into(),
                        spec.len().into(),
                        alpha.into(),
                        unopt(r[0]).into(),
                        r[1].into(),
                    ]);
                    println!("{name} L = {}: t* = {}", spec.len(), fmt_opt(unopt(r[0])));
                }
                run.write(&t)?;
            }
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x}"))
}

const STATS_COLUMNS: [&str; 11] = [
    "parameter",
    "mean",
    "std",
    "stderr",
    "count",
    "mean_phase",
    "mean_abs_phase",
    "std_abs_phase",
    "abs_phase_stderr",
    "phase_count",
    "mean_norm_sqr",
];

fn stats_row(s: &EnsembleStats) -> Vec<Cell> {
    vec![
        s.parameter.into(),
        s.mean.into(),
        s.std.into(),
        s.standard_error().into(),
        s.count.into(),
        s.mean_phase.into(),
        s.mean_abs_phase.into(),
        s.std_abs_phase.into(),
        s.abs_phase_standard_error().into(),
        s.phase_count.into(),
        s.mean_norm_sqr.into(),
    ]
}

pub fn ensemble(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let spec = cfg.chain.spec()?;
    let schedule = cfg.protocol.schedule()?;
    let ec = &cfg.ensemble;
    let opts = final_only(cfg);
    let seed = cfg.master_seed;

    // Each member stores [fidelity, phase difference or NaN, final norm^2].
    let member = |o: EvolveOptions| -> Result<Vec<f64>, CliError> {
        let r = evolve(&spec, &schedule, &o)?;
        Ok(vec![r.fidelity, opt(r.phase_difference(&spec).ok()), r.final_state.norm_sqr()])
    };

    let (params, m, name) = match ec.mode {
        EnsembleMode::Disorder => (&ec.strengths, ec.m, "strength"),
        EnsembleMode::Loss => (
            &ec.gammas,
            match ec.loss {
                LossKind::Uniform => 1,
                LossKind::Asymmetric => ec.samples,
            },
            "gamma",
        ),
    };
    if params.is_empty() || m == 0 {
        return Err(CliError::Config("ensemble: empty parameter list or member count".into()));
    }
    let store = run.points(match ec.mode {
        EnsembleMode::Disorder => "disorder",
        EnsembleMode::Loss => "loss",
    })?;
    let rows = store.compute(params.len() * m, |i| {
        let p = params[i / m];
        let idx = (i % m) as u64;
        match ec.mode {
            EnsembleMode::Disorder => {
                let disorder = DisorderSpec {
                    kind: ec.kind,
                    symmetry: ec.symmetry,
                    strength: p,
                    granularity: ec.granularity,
                };
                let r = sample_disorder(
                    &spec,
                    disorder.kind,
                    disorder.symmetry,
                    disorder.strength,
                    realization_seed(seed, idx),
                    disorder.granularity,
                )?;
                member(EvolveOptions {
                    disorder: Some(r),
                    ..opts.clone()
                })
            }
            EnsembleMode::Loss => {
                let loss = match ec.loss {
                    LossKind::Uniform => LossModel::uniform(&spec, p)?,
                    LossKind::Asymmetric => LossModel::asymmetric(&spec, p, &loss_offsets(&spec, seed, idx))?,
                };
                member(EvolveOptions {
                    loss: Some(loss),
                    ..opts.clone()
                })
            }
        }
    })?;

    let mut members = Table::new(
        "ensemble_members",
        &["parameter", "index", "seed", "fidelity", "phase_difference", "norm_sqr"],
    );
    let mut stats = Table::new("ensemble_stats", &STATS_COLUMNS);
    for (k, &p) in params.iter().enumerate() {
        let chunk = &rows[k * m..(k + 1) * m];
        for (i, r) in chunk.iter().enumerate() {
            members.push(vec![
                p.into(),
                i.into(),
                realization_seed(seed, i as u64).into(),
                r[0].into(),
                unopt(r[1]).into(),
                r[2].into(),
            ]);
        }
        let norms: Vec<f64> = chunk.iter().map(|r| r[2]).collect();
        let s = EnsembleStats::from_members(
            p,
            chunk.iter().map(|r| r[0]).collect(),
            chunk.iter().map(|r| unopt(r[1])).collect(),
            &norms,
        );
        println!(
            "{name} {p}: F = {:.6} +- {:.2e}, <|dphi|> = {:.3e} ({} members)",
            s.mean,
            s.standard_error(),
            s.mean_abs_phase,
            s.count
        );
        stats.push(stats_row(&s));
    }
    run.write(&members)?;
    run.write(&stats)?;
    Ok(())
}

pub fn fit(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let fc = &cfg.fit;
    let path = fc
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("fit.input is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: no header row", path.display())))?
        .split(',')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Config(format!("{}: no column `{name}`", path.display())))
    };
    let (xi, yi) = (col(&fc.x)?, col(&fc.y)?);
    let mut points = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> Result<Option<f64>, CliError> {
            let f = fields.get(i).map(|s| s.trim()).unwrap_or("");
            if f.is_empty() {
                return Ok(None);
            }
            f.parse::<f64>()
                .map(Some)
                .map_err(|_| CliError::Config(format!("{}: data row {}: bad number `{f}`", path.display(), n + 1)))
        };
        if let (Some(x), Some(y)) = (parse(xi)?, parse(yi)?) {
            points.push((x, y));
        }
    }
    let held = |x: f64| fc.holdout.iter().any(|h| (h - x).abs() <= 1e-9 * x.abs().max(1.0));
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().filter(|(x, _)| !held(*x)).copied().unzip();
    let f = cubic_fit(&xs, &ys)?;
    let [c3, c2, c1, c0] = f.coefficients;
    let mut coef = Table::new(
        "fit_coefficients",
        &["c3", "c2", "c1", "c0", "residual_rms", "normal_equation_error", "points"],
    );
    coef.push(vec![
        c3.into(),
        c2.into(),
        c1.into(),
        c0.into(),
        f.residual_rms.into(),
        f.normal_equation_error().into(),
        xs.len().into(),
    ]);
    run.write(&coef)?;
    let mut pred = Table::new("fit_predictions", &["x", "y", "predicted", "residual", "held_out"]);
    for &(x, y) in &points {
        let p = f.predict(x);
        pred.push(vec![x.into(), y.into(), p.into(), (y - p).into(), Cell::U(held(x) as u64)]);
    }
    run.write(&pred)?;
    println!(
        "{} = {c3:.6e} x^3 + {c2:.6e} x^2 + {c1:.6e} x + {c0:.6e} (rms {:.3e}, {} points)",
        fc.y,
        f.residual_rms,
        xs.len()
    );
    Ok(())
}

pub fn router(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let n = cfg.chain.n;
    let make = |k: usize| ChainSpec::router(k, n).map_err(|e| CliError::Config(format!("router: {e}")));
    let spec = make(cfg.chain.branches)?;
    let schedule = cfg.protocol.schedule()?;
    let r = evolve(&spec, &schedule, &final_only(cfg))?;
    run.write(&end_table("router_ports", &spec, &r.final_state))?;
    let ends = r.end_populations(&spec);
    println!(
        "K = {}, L = {}, t* = {}: fidelity {:.6}, ports {}",
        spec.branches(),
        spec.len(),
        schedule.t_star,
        r.fidelity,
        ends.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>().join(" ")
    );

    let ks = &cfg.router.branches;
    let specs = ks.iter().map(|&k| make(k)).collect::<Result<Vec<_>, _>>()?;
    let grid = cfg.sweep.t_star.values("sweep.t_star")?;
    let protocol = cfg.protocol.protocol()?;
    let opts = final_only(cfg);
    let store = run.points("router-scaling")?;
    let rows = store.compute(specs.len(), |i| {
        Ok(vec![opt(stabilization_scan(&specs[i], protocol, schedule.j0, &grid, cfg.sweep.theta, &opts)?)])
    })?;
    let mut t = Table::new("router_scaling", &["branches", "len", "theta", "t_star_stable"]);
    for (s, row) in specs.iter().zip(&rows) {
        let ts = unopt(row[0]);
        println!("K = {}: F >= {} from t* = {}", s.branches(), cfg.sweep.theta, fmt_opt(ts));
        t.push(vec![s.branches().into(), s.len().into(), cfg.sweep.theta.into(), ts.into()]);
    }
    run.write(&t)?;
    Ok(())
}
