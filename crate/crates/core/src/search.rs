//! Driven search on glued-trees graphs.
//!
//! The entrance mode is pumped at the frequency of the eigenmode that overlaps
//! most with the entrance and exit vertices. That eigenmode grows linearly in
//! amplitude while every other driven eigenmode oscillates with period set by
//! its detuning, so after roughly `1/Δ_min` the exit vertex holds more photons
//! than any other non-entrance vertex.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::linalg::SymmetricEigen;
#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::{default_dt, step_plan, MomentIntegrator, PumpConfig};
use crate::error::{invalid, Error, Result};
use crate::graphs::{
    build_glued_trees, build_glued_trees_weighted, glued_trees_column_chain, CouplingGraph, GluedTreesLayout,
    UNIT_CHAIN_EDGE_WEIGHT,
};
use crate::linalg::{hermitian2_top, linear_fit, LinearFit, RMatrix, C64, ZERO};
use crate::spectral::{diagonalize, krylov_eigensystem, EigenSystem};

/// Largest graph diagonalised densely; bigger ones go through a Krylov
/// projection seeded at the entrance and exit.
pub const DENSE_LIMIT: usize = 512;
pub const MAX_FULL_DEPTH: usize = 11;
pub const MAX_BASELINE_DEPTH: usize = 9;

const CLUSTER_TOL: f64 = 1e-9;
const DRIVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchSpec {
    pub depth: usize,
    pub gamma0: f64,
    /// `None` runs for three wait times
    pub t_final: Option<f64>,
    /// `None` uses [`default_dt`]
    pub dt: Option<f64>,
    pub use_reduced_chain: bool,
    pub edge_weight: f64,
    /// default: vertex 0
    pub entrance_index: Option<usize>,
    /// default: last vertex
    pub exit_index: Option<usize>,
    /// `None` pumps at the target eigenfrequency
    pub pump_frequency: Option<f64>,
    /// number of recorded samples after t = 0
    pub samples: usize,
}

impl SearchSpec {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            gamma0: 0.1,
            t_final: None,
            dt: None,
            use_reduced_chain: true,
            edge_weight: UNIT_CHAIN_EDGE_WEIGHT,
            entrance_index: None,
            exit_index: None,
            pump_frequency: None,
            samples: 1000,
        }
    }
}

/// Eigenmode (or rotated combination inside a degenerate cluster) with the
/// largest weight on the entrance and exit vertices.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetMode {
    pub index: usize,
    pub frequency: f64,
    pub entrance_weight: f64,
    pub exit_weight: f64,
    /// eigenmodes sharing the target frequency
    pub cluster: Range<usize>,
    /// true when the target was rotated inside a degenerate cluster
    pub rotated: bool,
    /// entrance weight in the cluster not carried by the target
    pub residual_entrance_weight: f64,
}

/// Maximises `|w_entrance|² + |w_exit|²` over eigenmodes, where `w` are the
/// eigenvector components divided by `sqrt(multiplicity)`. Ties go to the mode
/// nearest the band centre, then to one with entrance and exit in phase, then
/// to the lowest index.
pub fn find_target_eigenmode(
    eig: &EigenSystem,
    entrance: usize,
    exit: usize,
    multiplicity: Option<&[u32]>,
) -> Result<TargetMode> {
    let n = eig.n_modes();
    if entrance >= n || exit >= n {
        return Err(invalid(format!("entrance {entrance} / exit {exit} out of range for {n} modes")));
    }
    if eig.n_eigenmodes() == 0 {
        return Err(invalid("empty eigen-system"));
    }
    let scale = |j: usize| match multiplicity {
        Some(m) => 1.0 / (m[j] as f64).sqrt(),
        None => 1.0,
    };
    if let Some(m) = multiplicity {
        if m.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.len() });
        }
    }
    let (se, sx) = (scale(entrance), scale(exit));
    let t = eig.transform();
    let f = eig.frequencies();
    let centre = 0.5 * (f[0] + f[f.len() - 1]);

    let mut best: Option<(f64, TargetMode)> = None;
    let mut b_in_phase = false;
    for cl in eig.degenerate_clusters(CLUSTER_TOL) {
        let (mut gee, mut gxx, mut gex) = (0.0, 0.0, ZERO);
        for k in cl.clone() {
            let ue = t[(k, entrance)] * se;
            let ux = t[(k, exit)] * sx;
            gee += ue.norm_sqr();
            gxx += ux.norm_sqr();
            gex += ue.conj() * ux;
        }
        let (score, we, wx, residual) = if entrance == exit {
            (gee, gee.sqrt(), gee.sqrt(), 0.0)
        } else {
            let (lambda, beta) = hermitian2_top(gee, gex, gxx);
            let lambda = lambda.max(0.0);
            let we = lambda.sqrt() * beta[0].norm();
            // the subtraction leaves round-off of order eps·gee
            let residual = gee - we * we;
            let residual = if residual > 1e-12 * gee { residual } else { 0.0 };
            (lambda, we, lambda.sqrt() * beta[1].norm(), residual)
        };
        let freq = f[cl.start..cl.end].iter().sum::<f64>() / cl.len() as f64;
        let in_phase = gex.re > 1e-12 * score.max(1e-300);
        let cand = TargetMode {
            index: cl.start,
            frequency: freq,
            entrance_weight: we,
            exit_weight: wx,
            rotated: cl.len() > 1,
            cluster: cl,
            residual_entrance_weight: residual,
        };
        let better = match &best {
            None => true,
            Some((s, b)) => {
                let tie = 1e-12 * s.max(1.0);
                if score > s + tie {
                    true
                } else if score >= s - tie {
                    let (dc, db) = ((cand.frequency - centre).abs(), (b.frequency - centre).abs());
                    dc < db - 1e-12 || (dc <= db + 1e-12 && in_phase && !b_in_phase)
                } else {
                    false
                }
            }
        };
        if better {
            b_in_phase = in_phase;
            best = Some((score, cand));
        }
    }
    Ok(best.expect("at least one cluster").1)
}

/// Distance from the target to the nearest other eigenfrequency driven by an
/// entrance pump; zero when the target cluster leaves entrance weight behind,
/// infinite when nothing else is driven.
pub fn min_mismatch(eig: &EigenSystem, target: &TargetMode, entrance: usize) -> f64 {
    if target.residual_entrance_weight > DRIVE_TOL * DRIVE_TOL {
        return 0.0;
    }
    let t = eig.transform();
    eig.frequencies()
        .iter()
        .enumerate()
        .filter(|(k, _)| !target.cluster.contains(k) && t[(*k, entrance)].norm() > DRIVE_TOL)
        .map(|(_, w)| (w - target.frequency).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Dense diagonalisation for small graphs, Krylov projection from the given
/// seeds otherwise.
pub fn search_eigensystem(graph: &CouplingGraph, seeds: &[usize]) -> Result<EigenSystem> {
    if graph.n_modes() <= DENSE_LIMIT {
        diagonalize(graph)
    } else {
        krylov_eigensystem(graph, seeds)
    }
}

pub fn build_search_graph(depth: usize, use_reduced_chain: bool, edge_weight: f64) -> Result<CouplingGraph> {
    if !(edge_weight > 0.0) || !edge_weight.is_finite() {
        return Err(invalid("edge weight must be positive"));
    }
    if use_reduced_chain {
        glued_trees_column_chain(depth, edge_weight)
    } else {
        if depth > MAX_FULL_DEPTH {
            return Err(invalid(format!("full glued-trees graphs are limited to depth {MAX_FULL_DEPTH}")));
        }
        build_glued_trees_weighted(depth, edge_weight)
    }
}

/// Graph, spectrum and target of a search, before any dynamics.
#[derive(Debug, Clone)]
pub struct SearchSetup {
    pub graph: CouplingGraph,
    pub eig: EigenSystem,
    pub entrance: usize,
    pub exit: usize,
    pub target: TargetMode,
    pub min_mismatch: f64,
}

impl SearchSetup {
    /// `1/Δ_min`, infinite for a degenerate drive.
    pub fn wait_time(&self) -> f64 {
        if self.min_mismatch > 0.0 {
            1.0 / self.min_mismatch
        } else {
            f64::INFINITY
        }
    }
}

pub fn prepare_search(spec: &SearchSpec) -> Result<SearchSetup> {
    let graph = build_search_graph(spec.depth, spec.use_reduced_chain, spec.edge_weight)?;
    let n = graph.n_modes();
    let entrance = spec.entrance_index.unwrap_or(0);
    let exit = spec.exit_index.unwrap_or(n - 1);
    if entrance >= n || exit >= n {
        return Err(invalid(format!("entrance {entrance} / exit {exit} out of range for {n} modes")));
    }
    let eig = search_eigensystem(&graph, &[entrance, exit])?;
    let target = find_target_eigenmode(&eig, entrance, exit, graph.multiplicity())?;
    let min_mismatch = min_mismatch(&eig, &target, entrance);
    Ok(SearchSetup { graph, eig, entrance, exit, target, min_mismatch })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchResult {
    pub depth: usize,
    pub n_modes: usize,
    pub use_reduced_chain: bool,
    pub target: TargetMode,
    pub min_mismatch: f64,
    pub wait_time_estimate: f64,
    pub pump_frequency: f64,
    pub gamma0: f64,
    pub t_final: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// photons per vertex
    pub entrance: Vec<f64>,
    pub exit: Vec<f64>,
    /// largest per-vertex population outside entrance and exit
    pub max_other: Vec<f64>,
    /// population of the target eigenmode
    pub target_population: Vec<f64>,
    /// largest population among the other eigenmodes
    pub max_other_eigen: Vec<f64>,
    /// 1 + number of non-entrance vertices holding more photons than the exit
    pub exit_rank: Vec<usize>,
    /// last time the exit population decreased (0 if never)
    pub transient_end: f64,
    /// from here on the exit stays rank 1
    pub rank1_threshold: Option<f64>,
}

pub fn run_driven_search(spec: &SearchSpec) -> Result<SearchResult> {
    let setup = prepare_search(spec)?;
    run_prepared_search(&setup, spec)
}

pub fn run_prepared_search(setup: &SearchSetup, spec: &SearchSpec) -> Result<SearchResult> {
    let graph = &setup.graph;
    let n = graph.n_modes();
    let wait = setup.wait_time();
    let t_final = match spec.t_final {
        Some(t) => t,
        None if wait.is_finite() => 3.0 * wait,
        None => return Err(invalid("degenerate drive has no wait time; give t_final explicitly")),
    };
    let omega = spec.pump_frequency.unwrap_or(setup.target.frequency);
    let pump = PumpConfig::lasing_on_mode(n, setup.entrance, omega, spec.gamma0)?;
    let dt = spec.dt.unwrap_or_else(|| default_dt(graph, &pump));
    let (steps, h) = step_plan(t_final, dt)?;
    let samples = spec.samples.max(1).min(steps);
    let mult: Vec<f64> = match graph.multiplicity() {
        Some(m) => m.iter().map(|&x| x as f64).collect(),
        None => vec![1.0; n],
    };

    let tm = setup.eig.transform();
    let mut out = SearchResult {
        depth: spec.depth,
        n_modes: n,
        use_reduced_chain: spec.use_reduced_chain,
        target: setup.target.clone(),
        min_mismatch: setup.min_mismatch,
        wait_time_estimate: wait,
        pump_frequency: omega,
        gamma0: spec.gamma0,
        t_final,
        dt: h,
        times: Vec::new(),
        entrance: Vec::new(),
        exit: Vec::new(),
        max_other: Vec::new(),
        target_population: Vec::new(),
        max_other_eigen: Vec::new(),
        exit_rank: Vec::new(),
        transient_end: 0.0,
        rank1_threshold: None,
    };
    let mut record = |integ: &MomentIntegrator| {
        let occ = integ.photon_numbers();
        let per_vertex: Vec<f64> = occ.iter().zip(&mult).map(|(o, m)| o / m).collect();
        let ex = per_vertex[setup.exit];
        let mut max_other = 0.0f64;
        let mut rank = 1;
        for (j, &p) in per_vertex.iter().enumerate() {
            if j == setup.entrance || j == setup.exit {
                continue;
            }
            max_other = max_other.max(p);
            if p > ex {
                rank += 1;
            }
        }
        let mu = integ.mean();
        let mut target_pop = 0.0;
        let mut other_eigen = 0.0f64;
        for k in 0..setup.eig.n_eigenmodes() {
            let a: C64 = (0..n).map(|j| tm[(k, j)] * mu[j]).sum();
            if setup.target.cluster.contains(&k) {
                target_pop += a.norm_sqr();
            } else {
                other_eigen = other_eigen.max(a.norm_sqr());
            }
        }
        out.times.push(integ.time());
        out.entrance.push(per_vertex[setup.entrance]);
        out.exit.push(ex);
        out.max_other.push(max_other);
        out.target_population.push(target_pop);
        out.max_other_eigen.push(other_eigen);
        out.exit_rank.push(rank);
    };

    let mut integ = MomentIntegrator::new(graph, &pump, None)?;
    record(&integ);
    let mut next = 1;
    for s in 1..=steps {
        integ.step(h);
        // sample s*samples/steps hits every recorded index exactly once
        if s * samples >= next * steps {
            integ.check()?;
            record(&integ);
            next += 1;
        }
    }
    if let Some(last) = out.times.last_mut() {
        *last = t_final;
    }

    out.transient_end = transient_end(&out.times, &out.exit);
    out.rank1_threshold = rank1_threshold(&out.times, &out.exit_rank);
    Ok(out)
}

/// Last time at which the series drops (relative tolerance 1e-12).
pub fn transient_end(times: &[f64], values: &[f64]) -> f64 {
    let mut end = 0.0;
    for i in 1..values.len() {
        if values[i] < values[i - 1] - 1e-12 * values[i - 1].abs() {
            end = times[i];
        }
    }
    end
}

/// Earliest sample time after which the rank stays 1.
pub fn rank1_threshold(times: &[f64], ranks: &[usize]) -> Option<f64> {
    if ranks.last() != Some(&1) {
        return None;
    }
    let first = ranks.iter().rposition(|&r| r != 1).map_or(0, |i| i + 1);
    Some(times[first])
}

pub fn count_local_maxima(values: &[f64]) -> usize {
    values.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

/// Single-photon passive walk from the entrance of a full glued-trees graph.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PassiveOscillation {
    pub times: Vec<f64>,
    pub entrance: Vec<f64>,
    pub exit: Vec<f64>,
    pub total: Vec<f64>,
}

/// `ψ(t) = exp(-iCt) e_entrance`, sampled every `dt` up to `t_final`.
pub fn passive_oscillation(depth: usize, edge_weight: f64, t_final: f64, dt: f64) -> Result<PassiveOscillation> {
    if !(t_final >= 0.0) || !(dt > 0.0) {
        return Err(invalid("need t_final >= 0 and dt > 0"));
    }
    let graph = build_search_graph(depth, false, edge_weight)?;
    let n = graph.n_modes();
    let (entrance, exit) = (0, n - 1);
    // the orbit of the entrance vector spans everything the walk reaches
    let eig = krylov_eigensystem(&graph, &[entrance])?;
    let t = eig.transform();
    let coeff: Vec<C64> = (0..eig.n_eigenmodes()).map(|k| t[(k, entrance)]).collect();
    let samples = (t_final / dt).round() as usize;
    let mut out = PassiveOscillation { times: Vec::new(), entrance: Vec::new(), exit: Vec::new(), total: Vec::new() };
    let mut phased = vec![ZERO; coeff.len()];
    for s in 0..=samples {
        let time = s as f64 * dt;
        for (k, p) in phased.iter_mut().enumerate() {
            *p = coeff[k] * C64::from_polar(1.0, -eig.frequencies()[k] * time);
        }
        let amp = |j: usize| -> C64 { (0..phased.len()).map(|k| t[(k, j)].conj() * phased[k]).sum() };
        let total: f64 = (0..n).map(|j| amp(j).norm_sqr()).sum();
        out.times.push(time);
        out.entrance.push(amp(entrance).norm_sqr());
        out.exit.push(amp(exit).norm_sqr());
        out.total.push(total);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingPoint {
    pub depth: usize,
    pub n_modes: usize,
    pub frequency: f64,
    pub entrance_weight: f64,
    pub exit_weight: f64,
    /// entrance_weight⁻²
    pub inverse_square: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingStudy {
    pub use_reduced_chain: bool,
    pub edge_weight: f64,
    pub points: Vec<ScalingPoint>,
    /// weight⁻² = slope·depth + intercept, present with two or more depths
    pub fit: Option<LinearFit>,
}

impl ScalingStudy {
    pub fn require_fit(&self) -> Result<&LinearFit> {
        self.fit.as_ref().ok_or_else(|| invalid("a weight fit needs at least 2 distinct depths"))
    }
}

pub fn scaling_point(depth: usize, use_reduced_chain: bool, edge_weight: f64) -> Result<ScalingPoint> {
    let graph = build_search_graph(depth, use_reduced_chain, edge_weight)?;
    let n = graph.n_modes();
    let eig = search_eigensystem(&graph, &[0, n - 1])?;
    let target = find_target_eigenmode(&eig, 0, n - 1, graph.multiplicity())?;
    let w = target.entrance_weight;
    Ok(ScalingPoint {
        depth,
        n_modes: n,
        frequency: target.frequency,
        entrance_weight: w,
        exit_weight: target.exit_weight,
        inverse_square: 1.0 / (w * w),
    })
}

/// Builds a study from already computed points (e.g. evaluated in parallel).
pub fn scaling_study_from_points(points: Vec<ScalingPoint>, use_reduced_chain: bool, edge_weight: f64) -> ScalingStudy {
    let x: Vec<f64> = points.iter().map(|p| p.depth as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.inverse_square).collect();
    let fit = linear_fit(&x, &y);
    ScalingStudy { use_reduced_chain, edge_weight, points, fit }
}

pub fn weight_scaling_study(depths: &[usize], use_reduced_chain: bool, edge_weight: f64) -> Result<ScalingStudy> {
    if depths.is_empty() {
        return Err(invalid("scaling study needs at least one depth"));
    }
    let points = depths
        .iter()
        .map(|&d| scaling_point(d, use_reduced_chain, edge_weight))
        .collect::<Result<Vec<_>>>()?;
    Ok(scaling_study_from_points(points, use_reduced_chain, edge_weight))
}

/// Continuous-time classical random walk on a glued-trees graph: a walker
/// leaves each vertex at unit rate to a uniformly chosen neighbour, so
/// `dp/dt = (A D⁻¹ - I) p` and the stationary law is proportional to degree.
#[derive(Debug, Clone)]
pub struct ClassicalWalk {
    degrees: Vec<f64>,
    rates: Vec<f64>,
    modes: RMatrix,
    start: Vec<f64>,
    entrance: usize,
    exit: usize,
}

impl ClassicalWalk {
    pub fn new(depth: usize) -> Result<Self> {
        if depth > MAX_BASELINE_DEPTH {
            return Err(invalid(format!("classical baseline is limited to depth {MAX_BASELINE_DEPTH}")));
        }
        let graph = build_glued_trees(depth)?;
        let layout = GluedTreesLayout::new(depth)?;
        let n = graph.n_modes();
        let degrees: Vec<f64> = graph.degrees().iter().map(|&d| d as f64).collect();
        // D^{-1/2} A D^{-1/2} is symmetric and similar to A D⁻¹
        let mut s = RMatrix::zeros(n, n);
        for (r, c, _) in graph.coupling().iter() {
            s[(r, c)] = 1.0 / (degrees[r] * degrees[c]).sqrt();
        }
        let eig = SymmetricEigen::new(s);
        let entrance = layout.entrance();
        let rates = eig.eigenvalues.iter().map(|l| l - 1.0).collect();
        let start = (0..n).map(|k| eig.eigenvectors[(entrance, k)] / degrees[entrance].sqrt()).collect();
        Ok(Self { degrees, rates, modes: eig.eigenvectors, start, entrance, exit: layout.exit() })
    }

    pub fn n_vertices(&self) -> usize {
        self.degrees.len()
    }

    pub fn entrance(&self) -> usize {
        self.entrance
    }

    pub fn exit(&self) -> usize {
        self.exit
    }

    pub fn probability(&self, vertex: usize, t: f64) -> f64 {
        let s: f64 = (0..self.rates.len())
            .map(|k| self.modes[(vertex, k)] * self.start[k] * (self.rates[k] * t).exp())
            .sum();
        self.degrees[vertex].sqrt() * s
    }

    pub fn distribution(&self, t: f64) -> Vec<f64> {
        let w: Vec<f64> = (0..self.rates.len()).map(|k| self.start[k] * (self.rates[k] * t).exp()).collect();
        (0..self.n_vertices())
            .map(|j| self.degrees[j].sqrt() * (0..w.len()).map(|k| self.modes[(j, k)] * w[k]).sum::<f64>())
            .collect()
    }

    /// `deg(exit) / Σ deg`
    pub fn stationary_exit(&self) -> f64 {
        self.degrees[self.exit] / self.degrees.iter().sum::<f64>()
    }

    /// First time the exit occupation reaches half its stationary value,
    /// to 1e-10.
    pub fn half_stationary_time(&self) -> Result<f64> {
        let target = 0.5 * self.stationary_exit();
        let f = |t: f64| self.probability(self.exit, t) - target;
        let step = 0.05;
        let mut a = 0.0;
        while f(a + step) < 0.0 {
            a += step;
            if a > 1e7 {
                return Err(Error::NonConvergence { size: self.n_vertices(), residual: f(a) });
            }
        }
        let mut b = a + step;
        while b - a > 1e-10 {
            let m = 0.5 * (a + b);
            if f(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassicalSeries {
    pub times: Vec<f64>,
    pub exit: Vec<f64>,
    pub total: Vec<f64>,
    pub min_probability: Vec<f64>,
    pub stationary_exit: f64,
    pub half_stationary_time: f64,
}

/// Exit occupation of the classical walk started at the entrance, sampled
/// every `dt` up to `t_final`.
pub fn classical_hitting_baseline(depth: usize, t_final: f64, dt: f64) -> Result<ClassicalSeries> {
    if !(t_final >= 0.0) || !(dt > 0.0) {
        return Err(invalid("need t_final >= 0 and dt > 0"));
    }
    let walk = ClassicalWalk::new(depth)?;
    let samples = (t_final / dt).round() as usize;
    let mut out = ClassicalSeries {
        times: Vec::new(),
        exit: Vec::new(),
        total: Vec::new(),
        min_probability: Vec::new(),
        stationary_exit: walk.stationary_exit(),
        half_stationary_time: walk.half_stationary_time()?,
    };
    for s in 0..=samples {
        let t = s as f64 * dt;
        let p = walk.distribution(t);
        out.times.push(t);
        out.exit.push(p[walk.exit]);
        out.total.push(p.iter().sum());
        out.min_probability.push(p.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(out)
}
