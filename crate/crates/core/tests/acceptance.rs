//! Acceptance criteria 1-12. Prints one line per criterion and exits non-zero
//! if any fails.

use std::error::Error;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use dqw_core::decomposition::decomposition_error;
use dqw_core::dynamics::{evolve_final, fock_oracle_evolve};
use dqw_core::graphs::UNIT_CHAIN_EDGE_WEIGHT;
use dqw_core::observables::{participation_ratio, sweep_row};
use dqw_core::search::{
    count_local_maxima, passive_oscillation, prepare_search, scaling_point, ClassicalWalk,
};
use dqw_core::spectral::{
    chain_eigensystem_analytic, chain_label_to_index, defect_chain_secular_eigenvalues,
    validate_defect_chain_mapping,
};
use dqw_core::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Res<T> = std::result::Result<T, Box<dyn Error>>;
type Check = Res<(bool, String)>;
type Criterion = (&'static str, fn() -> Check);

fn fig2_graph_and_pump() -> Res<(CouplingGraph, EigenSystem, PumpConfig, usize)> {
    let graph = build_chain(51, 1.0, 0.5)?;
    let eig = chain_eigensystem_analytic(51, 1.0, 0.5)?;
    let k1 = chain_label_to_index(51, 1, 0.5)?;
    let pump = PumpConfig::lasing_on_mode(51, 25, eig.frequencies()[k1], 1.0)?;
    Ok((graph, eig, pump, k1))
}

fn fig2_trajectory() -> Res<GaussianTrajectory> {
    let (graph, _, pump, _) = fig2_graph_and_pump()?;
    Ok(evolve_driven(&graph, &pump, 20.0, 1e-3, None, 20)?)
}

fn criterion1() -> Check {
    let start = Instant::now();
    let (graph, eig, pump, k1) = fig2_graph_and_pump()?;
    let state = evolve_final(&graph, &pump, 20.0, 1e-3, None)?;
    let n_eigen = photon_numbers(&state, Basis::Eigen, Some(&eig))?;
    let s1 = eig.transform()[(k1, 25)].norm();
    let expected = s1 * s1 * 400.0;
    let rel = (n_eigen[k1] - expected).abs() / expected;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        rel <= 1e-6 && secs < 5.0,
        format!("n_1(20) = {:.10}, |S_1|^2 t^2 = {expected:.10}, rel {rel:.2e}, {secs:.2} s", n_eigen[k1]),
    ))
}

fn criterion2() -> Check {
    let traj = fig2_trajectory()?;
    let total = ObservableSeries::from_trajectory(&traj, ObservableKind::Total, None)?;
    let lasing = growth_exponent(&total, (5.0, 20.0))?.exponent;
    let lasing_ok = (lasing - 2.0).abs() <= 0.05;

    let single = build_chain(1, 1.0, 0.0)?;
    let pump = PumpConfig::squeezing_on_mode(1, 0, 2.0, 0.1)?;
    let traj = evolve_driven(&single, &pump, 25.0, 1e-3, None, 25)?;
    let total = ObservableSeries::from_trajectory(&traj, ObservableKind::Total, None)?;
    let r2 = growth_exponent(&total, (10.0, 25.0))?.exponential.r_squared;
    let squeezing_ok = r2 >= 0.999;
    Ok((
        lasing_ok && squeezing_ok,
        format!(
            "lasing log-log exponent {lasing:.4} (need 2.00 +/- 0.05) {}; squeezing log-linear R^2 {r2:.6} (need >= 0.999) {}",
            verdict(lasing_ok),
            verdict(squeezing_ok)
        ),
    ))
}

fn mean_diff(graph: &CouplingGraph, pump: &PumpConfig, t: f64, dt: f64) -> Res<f64> {
    let direct = evolve_final(graph, pump, t, dt, None)?;
    let factorised = decompose_run(graph, pump, t)?;
    Ok((&direct.mean - &factorised.mean).iter().fold(0.0f64, |m, z| m.max(z.norm())))
}

fn criterion3() -> Check {
    let (graph, _, pump, _) = fig2_graph_and_pump()?;
    let fig2 = mean_diff(&graph, &pump, 20.0, 1e-3)?;
    let fig2_fine = mean_diff(&graph, &pump, 20.0, 5e-4)?;

    let mut rng = StdRng::seed_from_u64(20240611);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(2..=8);
        let onsite: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || rng.random_bool(0.4) {
                    edges.push((i, j, C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
                }
            }
        }
        let g = CouplingGraph::from_edges(&onsite, &edges)?;
        let profile = CVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let omega = rng.random_range(-2.0..2.0);
        let pump = PumpConfig::lasing(profile, omega, 0.5)?;
        worst = worst.max(mean_diff(&g, &pump, 5.0, 1e-3)?);
    }
    let ok = fig2.max(fig2_fine) <= 1e-8 && worst <= 1e-8;
    Ok((
        ok,
        format!("fig2 max|dmu| {fig2:.2e} (dt 1e-3), {fig2_fine:.2e} (dt 5e-4); 10 random graphs max {worst:.2e}"),
    ))
}

fn criterion4() -> Check {
    let graph = build_chain(5, 1.0, 0.5)?;
    let gammas = [0.2, 0.1, 0.05, 0.025];
    let mut errs = Vec::new();
    for g in gammas {
        let pump = PumpConfig::squeezing_on_mode(5, 2, 2.0, g)?;
        errs.push(decomposition_error(&graph, &pump, 5.0, 1e-3)?.max_photon_diff);
    }
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let x: Vec<f64> = gammas.iter().map(|g| g.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let order = linalg::linear_fit(&x, &y).map_or(f64::NAN, |f| f.slope);
    Ok((monotone && order >= 1.0, format!("errors {}, fitted order {order:.3}", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "))))
}

fn criterion5() -> Check {
    let start = Instant::now();
    let graph = build_chain(2, 1.0, 0.5)?;
    let pump = PumpConfig::squeezing_on_mode(2, 0, 2.0, 0.1)?;
    let oracle = fock_oracle_evolve(&graph, &pump, 2.0, 1e-3, 30)?;
    let engine = evolve_final(&graph, &pump, 2.0, 1e-3, None)?.occupations();
    let two_mode = oracle.iter().zip(&engine).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let single = build_chain(1, 1.0, 0.0)?;
    let pump = PumpConfig::squeezing_on_mode(1, 0, 2.0, 0.1)?;
    let n = evolve_final(&single, &pump, 2.0, 1e-3, None)?.occupations()[0];
    let exact = (2.0f64 * 0.1 * 2.0).sinh().powi(2);
    let secs = start.elapsed().as_secs_f64();
    let ok = two_mode <= 1e-4 && (n - exact).abs() <= 1e-6 && secs < 30.0;
    Ok((
        ok,
        format!(
            "two-mode max |dn| {two_mode:.2e}; single-mode n {n:.12} vs sinh^2 {exact:.12} (|d| {:.1e}); {secs:.1} s",
            (n - exact).abs()
        ),
    ))
}

fn criterion6() -> Check {
    let mut worst_f = 0.0f64;
    let mut worst_t = 0.0f64;
    for n in 2..=201 {
        let analytic = chain_eigensystem_analytic(n, 1.0, 0.5)?;
        let numeric = diagonalize(&build_chain(n, 1.0, 0.5)?)?;
        for (a, b) in analytic.frequencies().iter().zip(numeric.frequencies()) {
            worst_f = worst_f.max((a - b).abs());
        }
        let d = analytic.transform() - numeric.transform();
        worst_t = worst_t.max(d.iter().fold(0.0f64, |m, z| m.max(z.norm())));
    }
    let chain_ok = worst_f <= 1e-10 && worst_t <= 1e-10;

    let mut cheb = 0.0f64;
    let mut secular = 0.0f64;
    for depth in 1..=10 {
        cheb = cheb.max(validate_defect_chain_mapping(depth)?.max_mismatch);
        let spectrum = diagonalize(&glued_trees_column_chain_unit(depth)?)?;
        let roots = defect_chain_secular_eigenvalues(depth)?;
        for (r, w) in roots.iter().zip(spectrum.frequencies()) {
            secular = secular.max((r - w).abs());
        }
    }
    let cheb_ok = cheb <= 1e-9;
    Ok((
        chain_ok && cheb_ok,
        format!(
            "chain n=2..201 max |dOmega| {worst_f:.1e}, max |dT| {worst_t:.1e} {}; U_N - U_(N-1) roots best mapping max distance {cheb:.4e} {}; mirror-sector roots U_(N+1) = +/-sqrt2 U_N max distance {secular:.1e}",
            verdict(chain_ok),
            verdict(cheb_ok)
        ),
    ))
}

fn glued_trees_column_chain_unit(depth: usize) -> dqw_core::Result<CouplingGraph> {
    graphs::glued_trees_column_chain(depth, UNIT_CHAIN_EDGE_WEIGHT)
}

fn criterion7() -> Check {
    let traj = fig2_trajectory()?;
    let var = ObservableSeries::from_trajectory(&traj, ObservableKind::Variance, None)?;
    let resc = ObservableSeries::from_trajectory(&traj, ObservableKind::VarianceRescaled, None)?;
    let a = growth_exponent(&var, (5.0, 20.0))?.exponent;
    let b = growth_exponent(&resc, (5.0, 20.0))?.exponent;
    let (a_ok, b_ok) = ((a - 3.0).abs() <= 0.15, (b - 1.0).abs() <= 0.15);
    Ok((
        a_ok && b_ok,
        format!(
            "sigma^2 exponent {a:.4} (need 3.0 +/- 0.15) {}; sigma^2/n_total exponent {b:.4} (need 1.0 +/- 0.15) {}",
            verdict(a_ok),
            verdict(b_ok)
        ),
    ))
}

/// Runs `f` on every element, spread over the available cores.
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers);
    thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk.max(1)).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn criterion8() -> Check {
    let graph = build_chain(51, 1.0, 0.5)?;
    let lasing = PumpConfig::lasing_on_mode(51, 25, 0.0, 1.0)?;
    let omegas: Vec<f64> = (0..=40).map(|k| 2.0 * k as f64 / 40.0).collect();
    let rows = par_map(&omegas, |&w| sweep_row(&graph, &lasing, w, 20.0, 2e-3));
    let prs = rows.into_iter().map(|r| r.map(|r| participation_ratio(&r))).collect::<dqw_core::Result<Vec<_>>>()?;
    let (lo, hi) = prs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
    let lasing_ok = hi / lo >= 3.0;

    let eig = diagonalize(&graph)?;
    let (wmin, wmax) = (2.0 * eig.frequencies()[0], 2.0 * eig.frequencies()[50]);
    let squeezing = PumpConfig::squeezing_on_mode(51, 25, 0.0, 0.1)?;
    let omegas: Vec<f64> = (0..=20).map(|k| wmin + (wmax - wmin) * k as f64 / 20.0).collect();
    let rows = par_map(&omegas, |&w| sweep_row(&graph, &squeezing, w, 20.0, 5e-3));
    let mut off = 0;
    for r in rows {
        let r = r?;
        let arg = (0..r.len()).fold(0, |b, j| if r[j] > r[b] { j } else { b });
        if arg != 25 {
            off += 1;
        }
    }
    let squeezing_ok = off == 0;
    Ok((
        lasing_ok && squeezing_ok,
        format!(
            "lasing participation ratio {lo:.2}..{hi:.2} (x{:.2}) {}; squeezing over [{wmin:.3}, {wmax:.3}]: {off} of 21 rows peak off the pumped channel {}",
            hi / lo,
            verdict(lasing_ok),
            verdict(squeezing_ok)
        ),
    ))
}

fn criterion9() -> Check {
    let start = Instant::now();
    let full = build_glued_trees(5)?;
    let reduced = column_reduce_glued_trees(&full)?;
    let eig = diagonalize(&reduced)?;
    let omega = eig.frequencies()[eig.n_modes() / 2];
    let pf = PumpConfig::lasing_on_mode(full.n_modes(), 0, omega, 0.1)?;
    let pr = PumpConfig::lasing_on_mode(reduced.n_modes(), 0, omega, 0.1)?;
    let tf = evolve_driven(&full, &pf, 20.0, 1e-3, None, 100)?;
    let tr = evolve_driven(&reduced, &pr, 20.0, 1e-3, None, 100)?;
    let (xf, xr) = (full.n_modes() - 1, reduced.n_modes() - 1);
    let mut worst = 0.0f64;
    for (a, b) in tf.states.iter().zip(&tr.states) {
        let (na, nb) = (a.occupations(), b.occupations());
        worst = worst.max((na[0] - nb[0]).abs()).max((na[xf] - nb[xr]).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-8 && secs < 60.0 && tf.times.len() == tr.times.len(),
        format!("{} vs {} modes, {} samples, max entrance/exit |dn| {worst:.2e}, {secs:.1} s", full.n_modes(), reduced.n_modes(), tf.times.len()),
    ))
}

fn criterion10() -> Check {
    let osc = passive_oscillation(3, 1.0, 60.0, 0.05)?;
    let maxima = count_local_maxima(&osc.exit);
    let non_monotone = osc.exit.windows(2).any(|w| w[1] < w[0]);
    let passive_ok = non_monotone && maxima >= 2;

    let mut spec = SearchSpec::new(3);
    spec.use_reduced_chain = false;
    spec.edge_weight = 1.0;
    let setup = prepare_search(&spec)?;
    let bound = 3.0 / setup.min_mismatch;
    let r = search::run_prepared_search(&setup, &spec)?;
    let after: Vec<f64> = r.times.iter().zip(&r.exit).filter(|(t, _)| **t >= r.transient_end).map(|(_, x)| *x).collect();
    let monotone = after.windows(2).all(|w| w[1] >= w[0]);
    let rank = *r.exit_rank.last().unwrap_or(&0);
    let driven_ok = monotone && r.transient_end < r.t_final && rank == 1 && r.t_final >= bound * (1.0 - 1e-12);
    Ok((
        passive_ok && driven_ok,
        format!(
            "passive: {maxima} exit maxima over t <= 60 {}; driven: Omega_D {:.6}, Delta_min {:.4}, t_final {:.3}, transient ends {:.3}, monotone after {monotone}, final rank {rank}, rank-1 from t = {:?} {}",
            verdict(passive_ok),
            r.pump_frequency,
            r.min_mismatch,
            r.t_final,
            r.transient_end,
            r.rank1_threshold,
            verdict(driven_ok)
        ),
    ))
}

fn criterion11() -> Check {
    let depths: Vec<usize> = (3..=9).collect();
    let study = weight_scaling_study(&depths, true, UNIT_CHAIN_EDGE_WEIGHT)?;
    let fit = *study.require_fit()?;
    let mut worst = 0.0f64;
    for d in 3..=7 {
        let a = scaling_point(d, false, UNIT_CHAIN_EDGE_WEIGHT)?.entrance_weight;
        let b = scaling_point(d, true, UNIT_CHAIN_EDGE_WEIGHT)?.entrance_weight;
        worst = worst.max((a - b).abs());
    }
    let mut detail = format!(
        "weight^-2 = {:.4} depth + {:.4}, R^2 {:.6}; full vs reduced depths 3..7 max |dw| {worst:.1e}",
        fit.slope, fit.intercept, fit.r_squared
    );
    let mut ok = fit.r_squared >= 0.99 && worst <= 1e-8;
    let start = Instant::now();
    let a = scaling_point(11, false, UNIT_CHAIN_EDGE_WEIGHT)?;
    let b = scaling_point(11, true, UNIT_CHAIN_EDGE_WEIGHT)?;
    let d = (a.entrance_weight - b.entrance_weight).abs();
    ok &= d <= 1e-8;
    detail += &format!("; depth 11 full ({} vertices) |dw| {d:.1e} in {:.1} s", a.n_modes, start.elapsed().as_secs_f64());
    Ok((ok, detail))
}

fn criterion12() -> Check {
    let depths: Vec<usize> = (3..=7).collect();
    let mut classical = Vec::new();
    let mut quantum = Vec::new();
    for &d in &depths {
        classical.push(ClassicalWalk::new(d)?.half_stationary_time()?);
        let r = run_driven_search(&SearchSpec::new(d))?;
        quantum.push(r.rank1_threshold.ok_or("driven search never reached rank 1")?);
    }
    let increasing = classical.windows(2).all(|w| w[1] > w[0]);
    let faster = (1..depths.len()).all(|i| classical[i] / classical[i - 1] > quantum[i] / quantum[i - 1]);
    Ok((
        increasing && faster,
        format!("classical half-stationary times {classical:.2?}; driven rank-1 thresholds {quantum:.2?}"),
    ))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "[ok]"
    } else {
        "[miss]"
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("lasing phase-matched growth", criterion1),
        ("total-photon growth laws", criterion2),
        ("lasing decomposition", criterion3),
        ("squeezing decomposition gap", criterion4),
        ("Gaussian engine vs Fock oracle", criterion5),
        ("spectral correctness", criterion6),
        ("variance growth", criterion7),
        ("frequency sweeps", criterion8),
        ("glued-trees reduction", criterion9),
        ("search behaviour", criterion10),
        ("weight scaling", criterion11),
        ("quantum vs classical ordering", criterion12),
    ];
    let mut failed = Vec::new();
    let mut total = Duration::ZERO;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = start.elapsed();
        total += secs;
        println!("criterion {:>2} {} {name}: {detail} ({:.1} s)", i + 1, if ok { "PASS" } else { "FAIL" }, secs.as_secs_f64());
        if !ok {
            failed.push(i + 1);
        }
    }
    println!("acceptance: {} of 12 passed in {:.1} s", 12 - failed.len(), total.as_secs_f64());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
