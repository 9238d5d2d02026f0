//! Photon numbers, position variances, growth-law fits and pump-frequency
//! sweeps.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::{evolve_final, Basis, GaussianState, GaussianTrajectory, PumpConfig};
use crate::error::{invalid, Error, Result};
use crate::graphs::CouplingGraph;
use crate::linalg::{linear_fit, LinearFit, C64, ZERO};
use crate::spectral::EigenSystem;

/// Per-mode photon numbers `N_jj + |μ_j|²` in the requested basis.
pub fn photon_numbers(state: &GaussianState, basis: Basis, eig: Option<&EigenSystem>) -> Result<Vec<f64>> {
    if state.basis == basis {
        return Ok(state.occupations());
    }
    let eig = eig.ok_or_else(|| invalid("a basis change needs an eigen-system"))?;
    match basis {
        Basis::Physical => Ok(state.to_physical(eig)?.occupations()),
        Basis::Eigen => {
            state.require_dim(eig.n_modes())?;
            let t = eig.transform();
            let n = state.n_modes();
            let mean = t * &state.mean;
            let second = state.number.iter().any(|x| *x != ZERO);
            let mut tmp = alloc::vec![ZERO; n];
            Ok((0..eig.n_eigenmodes())
                .map(|k| {
                    let mut occ = mean[k].norm_sqr();
                    if second {
                        // (T* N Tᵀ)_kk
                        for (j, out) in tmp.iter_mut().enumerate() {
                            *out = (0..n).map(|l| state.number[(j, l)] * t[(k, l)]).sum();
                        }
                        let d: C64 = (0..n).map(|j| t[(k, j)].conj() * tmp[j]).sum();
                        occ += d.re;
                    }
                    occ
                })
                .collect())
        }
    }
}

pub fn total_photons(state: &GaussianState) -> f64 {
    state.occupations().iter().sum()
}

fn physical_occupations(state: &GaussianState, positions: &[f64]) -> Result<Vec<f64>> {
    if state.basis != Basis::Physical {
        return Err(invalid("position moments need a physical-basis state"));
    }
    if positions.len() != state.n_modes() {
        return Err(Error::DimensionMismatch { expected: state.n_modes(), found: positions.len() });
    }
    Ok(state.occupations())
}

/// Raw second position moment `Σ x² n_x`.
pub fn position_variance(state: &GaussianState, positions: &[f64]) -> Result<f64> {
    let n = physical_occupations(state, positions)?;
    Ok(positions.iter().zip(&n).map(|(x, n)| x * x * n).sum())
}

/// `Σ x² n_x / Σ n_x`; zero for an empty state.
pub fn normalized_position_variance(state: &GaussianState, positions: &[f64]) -> Result<f64> {
    let n = physical_occupations(state, positions)?;
    let total: f64 = n.iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok(positions.iter().zip(&n).map(|(x, n)| x * x * n).sum::<f64>() / total)
}

/// Variance of the photon-number distribution about its mean position.
pub fn centred_position_variance(state: &GaussianState, positions: &[f64]) -> Result<f64> {
    let n = physical_occupations(state, positions)?;
    let total: f64 = n.iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let mean = positions.iter().zip(&n).map(|(x, n)| x * n).sum::<f64>() / total;
    Ok(positions.iter().zip(&n).map(|(x, n)| (x - mean) * (x - mean) * n).sum::<f64>() / total)
}

/// Inverse participation: `(Σ n)² / Σ n²`, between 1 (one mode) and the number
/// of modes (uniform). Zero for an empty distribution.
pub fn participation_ratio(values: &[f64]) -> f64 {
    let s: f64 = values.iter().sum();
    let s2: f64 = values.iter().map(|x| x * x).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ObservableKind {
    PhotonPhysical,
    PhotonEigen,
    Total,
    Variance,
    VarianceRescaled,
    VarianceCentred,
}

impl ObservableKind {
    pub fn is_per_mode(self) -> bool {
        matches!(self, Self::PhotonPhysical | Self::PhotonEigen)
    }
}

/// A time series. Per-mode kinds store one row per time; scalar kinds store
/// rows of length one.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservableSeries {
    pub kind: ObservableKind,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub metadata: BTreeMap<String, String>,
}

impl ObservableSeries {
    pub fn scalar(kind: ObservableKind, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
        }
        Ok(Self { kind, times, values: values.into_iter().map(|v| alloc::vec![v]).collect(), metadata: BTreeMap::new() })
    }

    /// Values of a scalar series.
    pub fn scalar_values(&self) -> Result<Vec<f64>> {
        if self.values.iter().any(|r| r.len() != 1) {
            return Err(invalid(format!("{:?} is not a scalar series", self.kind)));
        }
        Ok(self.values.iter().map(|r| r[0]).collect())
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Extracts one observable along a trajectory.
    pub fn from_trajectory(traj: &GaussianTrajectory, kind: ObservableKind, eig: Option<&EigenSystem>) -> Result<Self> {
        let positions = traj.graph.positions();
        let need_positions = || positions.ok_or_else(|| invalid("graph has no mode positions"));
        let mut values = Vec::with_capacity(traj.states.len());
        for s in &traj.states {
            values.push(match kind {
                ObservableKind::PhotonPhysical => photon_numbers(s, Basis::Physical, eig)?,
                ObservableKind::PhotonEigen => photon_numbers(s, Basis::Eigen, eig)?,
                ObservableKind::Total => alloc::vec![total_photons(s)],
                ObservableKind::Variance => alloc::vec![position_variance(s, need_positions()?)?],
                ObservableKind::VarianceRescaled => alloc::vec![normalized_position_variance(s, need_positions()?)?],
                ObservableKind::VarianceCentred => alloc::vec![centred_position_variance(s, need_positions()?)?],
            });
        }
        Ok(Self { kind, times: traj.times.clone(), values, metadata: BTreeMap::new() })
    }
}

/// Power-law and exponential fits of a positive series over a time window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrowthFit {
    /// slope of log(value) vs log(time)
    pub exponent: f64,
    pub power_law: LinearFit,
    /// log(value) vs time
    pub exponential: LinearFit,
    pub window: (f64, f64),
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares growth exponent over `window` (inclusive). Needs at least
/// [`MIN_FIT_SAMPLES`] samples, all with positive time and value.
pub fn growth_exponent(series: &ObservableSeries, window: (f64, f64)) -> Result<GrowthFit> {
    let values = series.scalar_values()?;
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(invalid("empty fit window"));
    }
    let mut lt = Vec::new();
    let mut t = Vec::new();
    let mut lv = Vec::new();
    for (i, (&time, &v)) in series.times.iter().zip(&values).enumerate() {
        if time < lo || time > hi {
            continue;
        }
        if !(v > 0.0) {
            return Err(invalid(format!("non-positive value {v:e} at sample {i} (t = {time})")));
        }
        if !(time > 0.0) {
            return Err(invalid(format!("non-positive time at sample {i}")));
        }
        lt.push(time.ln());
        t.push(time);
        lv.push(v.ln());
    }
    if t.len() < MIN_FIT_SAMPLES {
        return Err(invalid(format!("fit window holds {} samples, need {MIN_FIT_SAMPLES}", t.len())));
    }
    let power_law = linear_fit(&lt, &lv).ok_or_else(|| invalid("degenerate fit window"))?;
    let exponential = linear_fit(&t, &lv).ok_or_else(|| invalid("degenerate fit window"))?;
    Ok(GrowthFit { exponent: power_law.slope, power_law, exponential, window })
}

/// Final physical photon numbers after one driven run at `omega`.
pub fn sweep_row(graph: &CouplingGraph, template: &PumpConfig, omega: f64, t: f64, dt: f64) -> Result<Vec<f64>> {
    let pump = template.with_frequency(omega);
    Ok(evolve_final(graph, &pump, t, dt, None)?.occupations())
}

/// Rows of final photon numbers, one per pump frequency, in input order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrequencySweep {
    pub omegas: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl FrequencySweep {
    pub fn participation_ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| participation_ratio(r)).collect()
    }

    /// Index of the most occupied mode in each row.
    pub fn argmax_per_row(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| (0..r.len()).fold(0, |best, j| if r[j] > r[best] { j } else { best }))
            .collect()
    }
}

/// Serial sweep; the rows are independent so callers may instead map
/// [`sweep_row`] in parallel.
pub fn frequency_sweep(graph: &CouplingGraph, template: &PumpConfig, omegas: &[f64], t: f64, dt: f64) -> Result<FrequencySweep> {
    if omegas.is_empty() {
        return Err(invalid("frequency sweep needs at least one pump frequency"));
    }
    let rows = omegas.iter().map(|&w| sweep_row(graph, template, w, t, dt)).collect::<Result<Vec<_>>>()?;
    Ok(FrequencySweep { omegas: omegas.to_vec(), rows })
}
