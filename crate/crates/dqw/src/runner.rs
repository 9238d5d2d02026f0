//! Executes one experiment and writes its outputs plus `manifest.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dqw_core::dynamics::{default_dt, step_plan};
use dqw_core::decomposition::decomposition_error;
use dqw_core::observables::{sweep_row, FrequencySweep};
use dqw_core::search::{
    classical_hitting_baseline, passive_oscillation, prepare_search, run_prepared_search, scaling_point,
    scaling_study_from_points, DENSE_LIMIT,
};
use dqw_core::{diagonalize, evolve_driven, growth_exponent, ObservableKind, ObservableSeries, SearchSpec};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, OmegaRule};
use crate::error::{AppError, AppResult};
use crate::export;

/// Samples kept from a trajectory when `record_every` is not given.
const DEFAULT_RECORDS: usize = 200;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// directory that relative paths in the config resolve against
    pub config_dir: PathBuf,
    pub quiet: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub version: String,
    pub status: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolved_omega_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub summary: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    opts: &'a RunOptions,
    outputs: Vec<String>,
    omega: Option<f64>,
    dt: Option<f64>,
    summary: Value,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.opts.out_dir.join(name)
    }

    fn csv(&self) -> bool {
        self.cfg.output.csv()
    }

    fn json(&self) -> bool {
        self.cfg.output.json()
    }

    fn log(&self, msg: &str) {
        if !self.opts.quiet {
            eprintln!("{msg}");
        }
    }
}

/// Runs `exp`. The manifest is written whether or not the run succeeds.
pub fn run_experiment(cfg: &ExperimentConfig, exp: Experiment, opts: &RunOptions) -> AppResult<Manifest> {
    let start = Instant::now();
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| AppError::io(opts.out_dir.display(), e))?;
    let mut ctx = Ctx { cfg, opts, outputs: Vec::new(), omega: None, dt: None, summary: Value::Null };
    let result = cfg.validate(exp, &opts.config_dir).and_then(|()| dispatch(&mut ctx, exp));
    let manifest = Manifest {
        experiment: exp,
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: if result.is_ok() { "ok" } else { "failed" }.into(),
        config: cfg.clone(),
        resolved_omega_p: ctx.omega,
        dt: ctx.dt,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: ctx.outputs,
        summary: ctx.summary,
        error: result.as_ref().err().map(AppError::to_json),
    };
    export::write_json(&opts.out_dir.join("manifest.json"), &manifest)?;
    result.map(|()| manifest)
}

fn dispatch(ctx: &mut Ctx, exp: Experiment) -> AppResult<()> {
    match exp {
        Experiment::Run => run_single(ctx),
        Experiment::Spectrum => run_spectrum(ctx),
        Experiment::Sweep => run_sweep(ctx),
        Experiment::Decompose => run_decompose(ctx),
        Experiment::Search => run_search(ctx),
        Experiment::Scaling => run_scaling(ctx),
        Experiment::Baseline => run_baseline(ctx),
    }
}

fn fit_summary(series: &ObservableSeries, window: (f64, f64)) -> Value {
    match growth_exponent(series, window) {
        Ok(f) => serde_json::to_value(f).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn run_single(ctx: &mut Ctx) -> AppResult<()> {
    let cfg = ctx.cfg;
    let (gspec, pspec, time) = (cfg.graph.as_ref().unwrap(), cfg.pump.as_ref().unwrap(), cfg.time.as_ref().unwrap());
    let graph = gspec.build(&ctx.opts.config_dir)?;
    let n = graph.n_modes();
    let rule = pspec.rule()?.expect("validated");
    let eig = if n <= DENSE_LIMIT || !matches!(rule, OmegaRule::Value(_)) { Some(diagonalize(&graph)?) } else { None };
    let omega = match (&eig, rule) {
        (_, OmegaRule::Value(w)) => w,
        (Some(e), r) => r.resolve(e)?,
        (None, _) => unreachable!(),
    };
    ctx.omega = Some(omega);
    let pump = pspec.build(n, omega)?;
    let dt = time.dt.unwrap_or_else(|| default_dt(&graph, &pump));
    let (steps, h) = step_plan(time.t_final, dt)?;
    ctx.dt = Some(h);
    let every = time.record_every.unwrap_or((steps / DEFAULT_RECORDS).max(1));
    ctx.log(&format!("run: {n} modes, {steps} steps, omega_p = {omega}"));
    let traj = evolve_driven(&graph, &pump, time.t_final, dt, None, every)?;

    let total = ObservableSeries::from_trajectory(&traj, ObservableKind::Total, None)?;
    let window = (time.t_final / 4.0, time.t_final);
    let mut fits = serde_json::Map::new();
    fits.insert("total".into(), fit_summary(&total, window));
    let mut columns: Vec<(&str, Vec<f64>)> = vec![("total", total.scalar_values()?)];
    if graph.positions().is_some() {
        for (name, kind) in [
            ("variance", ObservableKind::Variance),
            ("variance_rescaled", ObservableKind::VarianceRescaled),
            ("variance_centred", ObservableKind::VarianceCentred),
        ] {
            let s = ObservableSeries::from_trajectory(&traj, kind, None)?;
            fits.insert(name.into(), fit_summary(&s, window));
            columns.push((name, s.scalar_values()?));
        }
    }
    let last = traj.final_state();
    ctx.summary = json!({
        "n_modes": n,
        "steps": steps,
        "records": traj.times.len(),
        "fit_window": [window.0, window.1],
        "growth_fits": fits,
        "final_photons": last.occupations(),
        "final_total": last.occupations().iter().sum::<f64>(),
        "uncertainty_min_eigenvalue": last.uncertainty_min_eigenvalue(),
    });
    if ctx.csv() {
        let p = ctx.path("trajectory.csv");
        export::write_trajectory_csv(&p, &traj, eig.as_ref())?;
        let mut cols: Vec<(&str, &[f64])> = vec![("time", &traj.times)];
        cols.extend(columns.iter().map(|(k, v)| (*k, v.as_slice())));
        let p = ctx.path("observables.csv");
        export::write_columns_csv(&p, &cols)?;
    }
    if ctx.json() {
        let p = ctx.path("final_state.json");
        export::write_json(&p, last)?;
    }
    Ok(())
}

fn run_spectrum(ctx: &mut Ctx) -> AppResult<()> {
    let graph = ctx.cfg.graph.as_ref().unwrap().build(&ctx.opts.config_dir)?;
    let eig = diagonalize(&graph)?;
    ctx.summary = json!({
        "n_modes": graph.n_modes(),
        "min_frequency": eig.frequencies().first(),
        "max_frequency": eig.frequencies().last(),
        "unitarity_error": eig.unitarity_error(),
        "diagonalization_error": eig.diagonalization_error(graph.coupling()),
    });
    if ctx.csv() {
        let p = ctx.path("spectrum.csv");
        export::write_spectrum_csv(&p, &eig)?;
    }
    if ctx.json() {
        let p = ctx.path("spectrum.json");
        export::write_json(&p, &json!({ "frequencies": eig.frequencies() }))?;
    }
    Ok(())
}

fn run_sweep(ctx: &mut Ctx) -> AppResult<()> {
    let cfg = ctx.cfg;
    let graph = cfg.graph.as_ref().unwrap().build(&ctx.opts.config_dir)?;
    let time = cfg.time.as_ref().unwrap();
    let omegas = cfg.sweep.as_ref().unwrap().omegas()?;
    let template = cfg.pump.as_ref().unwrap().build(graph.n_modes(), 0.0)?;
    let w_max = omegas.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let dt = time.dt.unwrap_or_else(|| default_dt(&graph, &template.with_frequency(w_max)));
    ctx.dt = Some(step_plan(time.t_final, dt)?.1);
    ctx.log(&format!("sweep: {} pump frequencies", omegas.len()));
    let rows = omegas
        .par_iter()
        .map(|&w| sweep_row(&graph, &template, w, time.t_final, dt))
        .collect::<Result<Vec<_>, _>>()?;
    let sweep = FrequencySweep { omegas, rows };
    ctx.summary = json!({
        "participation_ratio": sweep.participation_ratios(),
        "argmax_mode": sweep.argmax_per_row(),
    });
    if ctx.csv() {
        let p = ctx.path("sweep.csv");
        export::write_sweep_csv(&p, &sweep)?;
    }
    if ctx.json() {
        let p = ctx.path("sweep.json");
        export::write_json(&p, &sweep)?;
    }
    Ok(())
}

fn run_decompose(ctx: &mut Ctx) -> AppResult<()> {
    let cfg = ctx.cfg;
    let (pspec, time) = (cfg.pump.as_ref().unwrap(), cfg.time.as_ref().unwrap());
    let graph = cfg.graph.as_ref().unwrap().build(&ctx.opts.config_dir)?;
    let eig = diagonalize(&graph)?;
    let omega = pspec.rule()?.expect("validated").resolve(&eig)?;
    ctx.omega = Some(omega);
    let pump = pspec.build(graph.n_modes(), omega)?;
    let dt = time.dt.unwrap_or_else(|| default_dt(&graph, &pump));
    ctx.dt = Some(step_plan(time.t_final, dt)?.1);
    let mut gammas = vec![pspec.gamma0];
    if let Some(d) = &cfg.decompose {
        gammas.extend(&d.gamma0_values);
    }
    ctx.log(&format!("decompose: {} amplitudes", gammas.len()));
    let reports = gammas
        .par_iter()
        .map(|&g| -> AppResult<_> { Ok(decomposition_error(&graph, &pump.with_amplitude(g)?, time.t_final, dt)?) })
        .collect::<AppResult<Vec<_>>>()?;
    ctx.summary = json!({
        "max_photon_diff": reports.iter().map(|r| r.max_photon_diff).collect::<Vec<_>>(),
        "relative_total_diff": reports.iter().map(|r| r.relative_total_diff).collect::<Vec<_>>(),
    });
    if ctx.csv() {
        let col = |f: fn(&dqw_core::decomposition::DecompositionReport) -> f64| -> Vec<f64> {
            reports.iter().map(f).collect()
        };
        let (a, b, c, d) = (
            col(|r| r.amplitude_scale),
            col(|r| r.max_photon_diff),
            col(|r| r.relative_total_diff),
            col(|r| r.max_mean_diff),
        );
        let p = ctx.path("decompose.csv");
        export::write_columns_csv(
            &p,
            &[("gamma0", &a), ("max_photon_diff", &b), ("relative_total_diff", &c), ("max_mean_diff", &d)],
        )?;
    }
    if ctx.json() {
        let p = ctx.path("decompose.json");
        export::write_json(&p, &reports)?;
    }
    Ok(())
}

fn search_spec(s: &crate::config::SearchSection) -> SearchSpec {
    let mut spec = SearchSpec::new(s.depth);
    spec.gamma0 = s.gamma0;
    spec.t_final = s.t_final;
    spec.dt = s.dt;
    spec.use_reduced_chain = s.use_reduced_chain;
    spec.edge_weight = s.edge_weight;
    spec.samples = s.samples;
    spec
}

fn run_search(ctx: &mut Ctx) -> AppResult<()> {
    let s = ctx.cfg.search.as_ref().unwrap();
    let mut spec = search_spec(s);
    let setup = prepare_search(&spec)?;
    let wait = setup.wait_time();
    if spec.t_final.is_none() {
        if !wait.is_finite() {
            return Err(AppError::config("no finite wait time for this graph; set search.t_final"));
        }
        spec.t_final = Some(s.wait_multiple * wait);
    }
    ctx.log(&format!(
        "search: depth {}, {} modes, target frequency {}, t_final {}",
        s.depth,
        setup.graph.n_modes(),
        setup.target.frequency,
        spec.t_final.unwrap()
    ));
    let r = run_prepared_search(&setup, &spec)?;
    ctx.omega = Some(r.pump_frequency);
    ctx.dt = Some(r.dt);
    ctx.summary = json!({
        "n_modes": r.n_modes,
        "target": r.target,
        "min_mismatch": r.min_mismatch,
        "wait_time_estimate": r.wait_time_estimate,
        "t_final": r.t_final,
        "transient_end": r.transient_end,
        "rank1_threshold": r.rank1_threshold,
        "final_exit": r.exit.last(),
        "final_max_other": r.max_other.last(),
    });
    if ctx.csv() {
        let p = ctx.path("search.csv");
        export::write_search_csv(&p, &r)?;
    }
    if ctx.json() {
        let p = ctx.path("search.json");
        export::write_json(&p, &r)?;
    }
    if let Some(ps) = &s.passive {
        let osc = passive_oscillation(s.depth, ps.edge_weight, ps.t_final, ps.dt)?;
        ctx.summary["passive_max_exit"] = json!(osc.exit.iter().cloned().fold(0.0f64, f64::max));
        if ctx.csv() {
            let p = ctx.path("passive.csv");
            export::write_passive_csv(&p, &osc)?;
        }
    }
    Ok(())
}

fn run_scaling(ctx: &mut Ctx) -> AppResult<()> {
    let s = ctx.cfg.scaling.as_ref().unwrap();
    ctx.log(&format!("scaling: depths {:?}", s.depths));
    let points = s
        .depths
        .par_iter()
        .map(|&d| scaling_point(d, s.use_reduced_chain, s.edge_weight))
        .collect::<Result<Vec<_>, _>>()?;
    let study = scaling_study_from_points(points, s.use_reduced_chain, s.edge_weight);
    ctx.summary = json!({ "fit": study.fit });
    if ctx.csv() {
        let p = ctx.path("scaling.csv");
        export::write_scaling_csv(&p, &study)?;
    }
    if ctx.json() {
        let p = ctx.path("scaling.json");
        export::write_json(&p, &study)?;
    }
    Ok(())
}

fn run_baseline(ctx: &mut Ctx) -> AppResult<()> {
    let b = ctx.cfg.baseline.as_ref().unwrap();
    ctx.log(&format!("baseline: depths {:?}", b.depths));
    let series = b
        .depths
        .par_iter()
        .map(|&d| classical_hitting_baseline(d, b.t_final, b.dt))
        .collect::<Result<Vec<_>, _>>()?;
    let quantum: Vec<Option<f64>> = if b.compare_search {
        b.depths
            .par_iter()
            .map(|&d| -> AppResult<Option<f64>> {
                Ok(dqw_core::run_driven_search(&SearchSpec::new(d))?.rank1_threshold)
            })
            .collect::<AppResult<Vec<_>>>()?
    } else {
        vec![None; b.depths.len()]
    };
    let depths: Vec<f64> = b.depths.iter().map(|&d| d as f64).collect();
    let stat: Vec<f64> = series.iter().map(|s| s.stationary_exit).collect();
    let half: Vec<f64> = series.iter().map(|s| s.half_stationary_time).collect();
    let q: Vec<f64> = quantum.iter().map(|x| x.unwrap_or(f64::NAN)).collect();
    ctx.summary = json!({
        "depths": b.depths,
        "half_stationary_time": half,
        "quantum_rank1_threshold": quantum,
    });
    if ctx.csv() {
        for (d, s) in b.depths.iter().zip(&series) {
            let p = ctx.path(&format!("baseline_depth{d}.csv"));
            export::write_classical_csv(&p, s)?;
        }
        let p = ctx.path("baseline.csv");
        let mut cols: Vec<(&str, &[f64])> =
            vec![("depth", &depths), ("stationary_exit", &stat), ("half_stationary_time", &half)];
        if b.compare_search {
            cols.push(("quantum_rank1_threshold", &q));
        }
        export::write_columns_csv(&p, &cols)?;
    }
    if ctx.json() {
        let p = ctx.path("baseline.json");
        export::write_json(&p, &ctx.summary)?;
    }
    Ok(())
}

/// Output directory: the flag, then the config, then `out/<experiment>`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig, config_dir: &Path, exp: Experiment) -> PathBuf {
    match (flag, &cfg.output.directory) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => config_dir.join(d),
        (None, None) => PathBuf::from("out").join(exp.to_string()),
    }
}
