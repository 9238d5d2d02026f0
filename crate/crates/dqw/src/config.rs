//! Experiment configuration files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dqw_core::graphs::{build_glued_trees_weighted, glued_trees_column_chain, UNIT_CHAIN_EDGE_WEIGHT};
use dqw_core::{build_chain, CouplingGraph, DriveType, EigenSystem, PumpConfig, SparseMatrix, C64, CVector};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::graph_io::{load_graph, EdgeRecord, GraphDocument, Number};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Run,
    Spectrum,
    Sweep,
    Decompose,
    Search,
    Scaling,
    Baseline,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("plain enum");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

fn unit_weight() -> f64 {
    1.0
}

fn chain_weight() -> f64 {
    UNIT_CHAIN_EDGE_WEIGHT
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Chain {
        n_modes: usize,
        onsite: f64,
        coupling: f64,
    },
    GluedTrees {
        depth: usize,
        #[serde(default = "unit_weight")]
        edge_weight: f64,
    },
    ColumnChain {
        depth: usize,
        #[serde(default = "chain_weight")]
        edge_weight: f64,
    },
    File {
        path: PathBuf,
    },
    Inline(GraphDocument),
}

impl GraphSpec {
    /// Relative file paths resolve against `base`.
    pub fn build(&self, base: &Path) -> AppResult<CouplingGraph> {
        Ok(match self {
            Self::Chain { n_modes, onsite, coupling } => build_chain(*n_modes, *onsite, *coupling)?,
            Self::GluedTrees { depth, edge_weight } => build_glued_trees_weighted(*depth, *edge_weight)?,
            Self::ColumnChain { depth, edge_weight } => glued_trees_column_chain(*depth, *edge_weight)?,
            Self::File { path } => load_graph(&base.join(path))?,
            Self::Inline(doc) => doc.to_graph()?,
        })
    }
}

/// How the pump frequency is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmegaRule {
    /// `eigenmode:k`: the k-th highest eigenfrequency (k = 1 is the top of the
    /// band, matching the chain labelling Ω_j = ω + 2C cos(jπ/(n+1)))
    Eigenmode(usize),
    /// `ascending:k`: index k (from 0) in ascending order
    Ascending(usize),
    /// `mid-band`: the median eigenfrequency
    MidBand,
    Value(f64),
}

impl FromStr for OmegaRule {
    type Err = AppError;

    fn from_str(s: &str) -> AppResult<Self> {
        let s = s.trim();
        let bad = || AppError::config(format!("unrecognised omega_p_rule {s:?}"));
        if s == "mid-band" {
            return Ok(Self::MidBand);
        }
        if let Some(k) = s.strip_prefix("eigenmode:") {
            let k: usize = k.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(AppError::config("eigenmode labels start at 1"));
            }
            return Ok(Self::Eigenmode(k));
        }
        if let Some(k) = s.strip_prefix("ascending:") {
            return Ok(Self::Ascending(k.parse().map_err(|_| bad())?));
        }
        s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Self::Value).ok_or_else(bad)
    }
}

impl OmegaRule {
    pub fn resolve(&self, eig: &EigenSystem) -> AppResult<f64> {
        let f = eig.frequencies();
        let n = f.len();
        match *self {
            Self::Value(w) => Ok(w),
            Self::Eigenmode(k) if k <= n => Ok(f[n - k]),
            Self::Ascending(k) if k < n => Ok(f[k]),
            Self::MidBand => Ok(if n % 2 == 1 { f[n / 2] } else { 0.5 * (f[n / 2 - 1] + f[n / 2]) }),
            _ => Err(AppError::config(format!("omega_p rule {self:?} out of range for {n} eigenmodes"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    pub drive: DriveType,
    /// unit pump on a single mode
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    /// explicit lasing profile
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<Number>>,
    /// explicit squeezing profile, each symmetric pair once
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<EdgeRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_p_rule: Option<String>,
    pub gamma0: f64,
}

impl PumpSpec {
    pub fn rule(&self) -> AppResult<Option<OmegaRule>> {
        match (&self.omega_p, &self.omega_p_rule) {
            (Some(_), Some(_)) => Err(AppError::config("give omega_p or omega_p_rule, not both")),
            (Some(w), None) => Ok(Some(OmegaRule::Value(*w))),
            (None, Some(r)) => Ok(Some(r.parse()?)),
            (None, None) => Ok(None),
        }
    }

    fn validate(&self) -> AppResult<()> {
        if !(self.gamma0 >= 0.0) || !self.gamma0.is_finite() {
            return Err(AppError::config("pump.gamma0 must be finite and >= 0"));
        }
        let given = [self.mode.is_some(), self.vector.is_some(), self.entries.is_some()];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err(AppError::config("pump needs exactly one of mode, vector, entries"));
        }
        match self.drive {
            DriveType::Lasing if self.entries.is_some() => {
                Err(AppError::config("lasing pumps take a mode or a vector, not entries"))
            }
            DriveType::Squeezing if self.vector.is_some() => {
                Err(AppError::config("squeezing pumps take a mode or entries, not a vector"))
            }
            _ => self.rule().map(|_| ()),
        }
    }

    /// Pump with the given frequency on an `n`-mode graph.
    pub fn build(&self, n: usize, omega_p: f64) -> AppResult<PumpConfig> {
        let pump = match (self.drive, self.mode, &self.vector, &self.entries) {
            (DriveType::Lasing, Some(k), _, _) => PumpConfig::lasing_on_mode(n, k, omega_p, self.gamma0)?,
            (DriveType::Squeezing, Some(k), _, _) => PumpConfig::squeezing_on_mode(n, k, omega_p, self.gamma0)?,
            (DriveType::Lasing, None, Some(v), _) => {
                if v.len() != n {
                    return Err(AppError::config(format!("pump vector has {} entries for {n} modes", v.len())));
                }
                let v = CVector::from_iterator(n, v.iter().map(|x| x.to_c64()));
                PumpConfig::lasing(v, omega_p, self.gamma0)?
            }
            (DriveType::Squeezing, None, _, Some(e)) => {
                if let Some(bad) = e.iter().find(|e| e.i >= n || e.j >= n) {
                    return Err(AppError::config(format!("pump entry ({},{}) out of range", bad.i, bad.j)));
                }
                let trip = e.iter().flat_map(|e| {
                    let v = C64::new(e.re, e.im);
                    if e.i == e.j {
                        vec![(e.i, e.i, v)]
                    } else {
                        vec![(e.i, e.j, v), (e.j, e.i, v)]
                    }
                });
                PumpConfig::squeezing(SparseMatrix::from_triplets(n, trip), omega_p, self.gamma0)?
            }
            _ => return Err(AppError::config("pump profile does not match the drive type")),
        };
        Ok(pump)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_final: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// integrator steps between recorded samples; default gives about 200
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omegas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl SweepSpec {
    pub fn omegas(&self) -> AppResult<Vec<f64>> {
        match (&self.omegas, self.omega_min, self.omega_max, self.points) {
            (Some(w), None, None, None) if !w.is_empty() => Ok(w.clone()),
            (None, Some(a), Some(b), Some(p)) if p >= 1 && a <= b => Ok(if p == 1 {
                vec![a]
            } else {
                (0..p).map(|k| a + (b - a) * k as f64 / (p - 1) as f64).collect()
            }),
            _ => Err(AppError::config("sweep needs a non-empty omegas list or omega_min <= omega_max with points >= 1")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSpec {
    /// extra pump amplitudes to repeat the comparison at
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma0_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassiveSpec {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "unit_weight")]
    pub edge_weight: f64,
}

fn default_gamma() -> f64 {
    0.1
}

fn default_wait_multiple() -> f64 {
    3.0
}

fn default_samples() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub depth: usize,
    #[serde(default = "default_gamma")]
    pub gamma0: f64,
    /// overrides `wait_multiple`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// run time in units of the wait time 1/Δ_min
    #[serde(default = "default_wait_multiple")]
    pub wait_multiple: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "yes")]
    pub use_reduced_chain: bool,
    #[serde(default = "chain_weight")]
    pub edge_weight: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passive: Option<PassiveSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub depths: Vec<usize>,
    #[serde(default = "yes")]
    pub use_reduced_chain: bool,
    #[serde(default = "chain_weight")]
    pub edge_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub depths: Vec<usize>,
    pub t_final: f64,
    pub dt: f64,
    /// also run the driven search at each depth and tabulate both times
    #[serde(default)]
    pub compare_search: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { directory: None, formats: default_formats() }
    }
}

impl OutputSpec {
    pub fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }

    pub fn json(&self) -> bool {
        self.formats.contains(&Format::Json)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<PumpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decompose: Option<DecomposeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSection>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn need<'a, T>(x: &'a Option<T>, what: &str, exp: Experiment) -> AppResult<&'a T> {
    x.as_ref().ok_or_else(|| AppError::config(format!("experiment `{exp}` needs a `{what}` section")))
}

fn check_positive(x: f64, what: &str) -> AppResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(AppError::config(format!("{what} must be positive, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> AppResult<Self> {
        serde_json::from_str(text)
            .map_err(|e| AppError::config(format!("config line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path.display(), e))?;
        Self::parse(&text)
    }

    /// Picks the experiment from the subcommand and/or the file; they must agree.
    pub fn resolve_experiment(&self, requested: Option<Experiment>) -> AppResult<Experiment> {
        match (requested, self.experiment) {
            (Some(a), Some(b)) if a != b => {
                Err(AppError::config(format!("subcommand `{a}` does not match config experiment `{b}`")))
            }
            (Some(a), _) | (None, Some(a)) => Ok(a),
            (None, None) => Err(AppError::config("no experiment given")),
        }
    }

    /// Applies a command-line step override.
    pub fn override_dt(&mut self, dt: f64) {
        if let Some(t) = &mut self.time {
            t.dt = Some(dt);
        }
        if let Some(s) = &mut self.search {
            s.dt = Some(dt);
        }
    }

    pub fn validate(&self, exp: Experiment, base: &Path) -> AppResult<()> {
        if let Some(GraphSpec::File { path }) = &self.graph {
            let full = base.join(path);
            if !full.is_file() {
                return Err(AppError::config(format!("graph file {} does not exist", full.display())));
            }
        }
        if let Some(p) = &self.pump {
            p.validate()?;
        }
        if let Some(t) = &self.time {
            check_positive(t.t_final, "time.t_final")?;
            if let Some(dt) = t.dt {
                check_positive(dt, "time.dt")?;
                if dt >= t.t_final {
                    return Err(AppError::config("time.dt must be smaller than time.t_final"));
                }
            }
            if t.record_every == Some(0) {
                return Err(AppError::config("time.record_every must be >= 1"));
            }
        }
        match exp {
            Experiment::Run | Experiment::Decompose => {
                need(&self.graph, "graph", exp)?;
                let p = need(&self.pump, "pump", exp)?;
                need(&self.time, "time", exp)?;
                if p.rule()?.is_none() {
                    return Err(AppError::config("pump needs omega_p or omega_p_rule"));
                }
                if exp == Experiment::Decompose {
                    let extra = self.decompose.as_ref().map(|d| d.gamma0_values.as_slice()).unwrap_or(&[]);
                    if extra.iter().any(|g| !(*g >= 0.0)) {
                        return Err(AppError::config("decompose.gamma0_values must be >= 0"));
                    }
                }
            }
            Experiment::Spectrum => {
                need(&self.graph, "graph", exp)?;
            }
            Experiment::Sweep => {
                need(&self.graph, "graph", exp)?;
                need(&self.pump, "pump", exp)?;
                need(&self.time, "time", exp)?;
                need(&self.sweep, "sweep", exp)?.omegas()?;
            }
            Experiment::Search => {
                let s = need(&self.search, "search", exp)?;
                if s.depth == 0 {
                    return Err(AppError::config("search.depth must be >= 1"));
                }
                if !(s.gamma0 >= 0.0) {
                    return Err(AppError::config("search.gamma0 must be >= 0"));
                }
                check_positive(s.edge_weight, "search.edge_weight")?;
                match s.t_final {
                    Some(t) => check_positive(t, "search.t_final")?,
                    None => check_positive(s.wait_multiple, "search.wait_multiple")?,
                }
                if let Some(dt) = s.dt {
                    check_positive(dt, "search.dt")?;
                }
                if let Some(p) = &s.passive {
                    check_positive(p.t_final, "search.passive.t_final")?;
                    check_positive(p.dt, "search.passive.dt")?;
                }
            }
            Experiment::Scaling => {
                let s = need(&self.scaling, "scaling", exp)?;
                if s.depths.is_empty() || s.depths.contains(&0) {
                    return Err(AppError::config("scaling.depths must be a non-empty list of depths >= 1"));
                }
                check_positive(s.edge_weight, "scaling.edge_weight")?;
            }
            Experiment::Baseline => {
                let b = need(&self.baseline, "baseline", exp)?;
                if b.depths.is_empty() || b.depths.contains(&0) {
                    return Err(AppError::config("baseline.depths must be a non-empty list of depths >= 1"));
                }
                check_positive(b.t_final, "baseline.t_final")?;
                check_positive(b.dt, "baseline.dt")?;
            }
        }
        Ok(())
    }
}
