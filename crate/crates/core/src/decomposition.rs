//! Factorisation of a driven walk into an effective input state followed by
//! the passive walk.
//!
//! In the interaction picture each eigenmode sees the pump
//! `S e^{iΔt}`, whose time integral `z` fixes the input state: a coherent
//! state with eigenbasis amplitude `-i z` for lasing, and the squeezed vacuum
//! `exp(-i(Σ z_kk' A†_k A†_k' + h.c.))|0>` for squeezing. The passive walk then
//! runs for the same time. Lasing is exact; for squeezing the generators at
//! different times do not commute, and [`decomposition_error`] measures the
//! resulting gap.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::{evolve_final, evolve_passive_with, DriveType, GaussianState, PumpConfig};
use crate::error::{invalid, Error, Result};
use crate::graphs::CouplingGraph;
use crate::linalg::{CMatrix, CVector, SparseMatrix, C64, I};
use crate::spectral::{diagonalize, pump_to_eigenbasis, EigenProfile, EigenPump, EigenSystem};

/// Time-integrated pump, in the eigenbasis and in the physical basis.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum IntegratedProfile {
    Lasing(#[cfg_attr(feature = "serde", serde(with = "crate::linalg::serde_dense::vector"))] CVector),
    /// symmetric
    Squeezing(#[cfg_attr(feature = "serde", serde(with = "crate::linalg::serde_dense::matrix"))] CMatrix),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegratedPump {
    pub z: IntegratedProfile,
    /// `T† z` (lasing) or `T† z T*` (squeezing)
    pub z_physical: IntegratedProfile,
    pub walk_time: f64,
}

impl IntegratedPump {
    pub fn drive_type(&self) -> DriveType {
        match self.z {
            IntegratedProfile::Lasing(_) => DriveType::Lasing,
            IntegratedProfile::Squeezing(_) => DriveType::Squeezing,
        }
    }
}

/// `∫₀ᵗ e^{iΔs} ds`, written as `t e^{iΔt/2} sinc(Δt/2)` to stay accurate for
/// small detuning.
fn phase_integral(delta: f64, t: f64, eps: f64) -> C64 {
    if delta.abs() <= eps {
        return C64::new(t, 0.0);
    }
    let half = 0.5 * delta * t;
    C64::from_polar(2.0 * half.sin() / delta, half)
}

/// Closed-form `z = S (e^{iΔt} - 1)/(iΔ)`, or `S t` on resonance
/// (`|Δ| <= 1e-12 max|Ω|`).
pub fn integrated_pump(eigpump: &EigenPump, eig: &EigenSystem, t: f64) -> Result<IntegratedPump> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("walk time must be finite and >= 0"));
    }
    if eigpump.frequencies.len() != eig.n_eigenmodes() {
        return Err(Error::DimensionMismatch { expected: eig.n_eigenmodes(), found: eigpump.frequencies.len() });
    }
    let eps = 1e-12 * eig.max_abs_frequency();
    let tm = eig.transform();
    let (z, z_physical) = match &eigpump.profile {
        EigenProfile::Lasing { s, mismatch } => {
            let z = CVector::from_iterator(s.len(), s.iter().zip(mismatch).map(|(s, &d)| s * phase_integral(d, t, eps)));
            let zp = tm.adjoint() * &z;
            (IntegratedProfile::Lasing(z), IntegratedProfile::Lasing(zp))
        }
        EigenProfile::Squeezing { s, mismatch } => {
            let n = s.nrows();
            let mut z = CMatrix::from_fn(n, n, |a, b| s[(a, b)] * phase_integral(mismatch[(a, b)], t, eps));
            // exact symmetry despite rounding in the mismatch table
            z = (&z + z.transpose()).scale(0.5);
            let zp = tm.adjoint() * &z * tm.map(|x| x.conj());
            let zp = (&zp + zp.transpose()).scale(0.5);
            (IntegratedProfile::Squeezing(z), IntegratedProfile::Squeezing(zp))
        }
    };
    Ok(IntegratedPump { z, z_physical, walk_time: t })
}

/// Largest growth rate per unit time of the quadratic generator built from `z`.
fn squeezing_rate(z: &CMatrix) -> f64 {
    (0..z.nrows())
        .map(|r| z.row(r).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * 2.0
}

/// Physical-basis input state of the factorised walk. The squeezing case is
/// exponentiated with the moment integrator (no hopping, constant profile,
/// unit time).
pub fn effective_input_state(zp: &IntegratedPump, eig: &EigenSystem) -> Result<GaussianState> {
    let n = eig.n_modes();
    match &zp.z_physical {
        IntegratedProfile::Lasing(z) => {
            if z.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: z.len() });
            }
            Ok(GaussianState::coherent(z.map(|x| -I * x)))
        }
        IntegratedProfile::Squeezing(z) => {
            if z.nrows() != n {
                return Err(Error::DimensionMismatch { expected: n, found: z.nrows() });
            }
            let rate = squeezing_rate(z);
            if rate == 0.0 {
                return Ok(GaussianState::vacuum(n));
            }
            let steps = ((rate / 0.01).ceil() as usize).max(128);
            let empty = CouplingGraph::from_edges(&alloc::vec![C64::new(0.0, 0.0); n], &[])?;
            let pump = PumpConfig::squeezing(SparseMatrix::from_dense(z), 0.0, 1.0)?;
            evolve_final(&empty, &pump, 1.0, 1.0 / steps as f64, None)
        }
    }
}

/// Effective input state followed by the passive walk; no integration of the
/// drive itself. Starts from vacuum.
pub fn decompose_run(graph: &CouplingGraph, pump: &PumpConfig, t: f64) -> Result<GaussianState> {
    let eig = diagonalize(graph)?;
    decompose_run_with(&eig, pump, t)
}

pub fn decompose_run_with(eig: &EigenSystem, pump: &PumpConfig, t: f64) -> Result<GaussianState> {
    let ep = pump_to_eigenbasis(pump, eig)?;
    let zp = integrated_pump(&ep, eig, t)?;
    let input = effective_input_state(&zp, eig)?;
    evolve_passive_with(eig, &input, t)
}

/// Direct integration versus the factorised walk.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecompositionReport {
    pub drive_type: DriveType,
    pub pump_frequency: f64,
    pub amplitude_scale: f64,
    pub walk_time: f64,
    pub dt: f64,
    /// max_j |n_j(direct) - n_j(factorised)|
    pub max_photon_diff: f64,
    /// |N_direct - N_factorised| / N_direct (absolute when N_direct = 0)
    pub relative_total_diff: f64,
    pub max_mean_diff: f64,
    pub direct_photons: Vec<f64>,
    pub decomposed_photons: Vec<f64>,
}

pub fn decomposition_error(graph: &CouplingGraph, pump: &PumpConfig, t: f64, dt: f64) -> Result<DecompositionReport> {
    let direct = evolve_final(graph, pump, t, dt, None)?;
    let factored = decompose_run(graph, pump, t)?;
    let a = direct.occupations();
    let b = factored.occupations();
    let max_photon_diff = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let (ta, tb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let relative_total_diff = if ta > 0.0 { (ta - tb).abs() / ta } else { (ta - tb).abs() };
    let max_mean_diff = crate::linalg::max_abs_diff_vec(&direct.mean, &factored.mean);
    if !max_photon_diff.is_finite() {
        return Err(Error::NumericalInstability { time: t, detail: "non-finite photon difference".into() });
    }
    Ok(DecompositionReport {
        drive_type: pump.drive_type(),
        pump_frequency: pump.pump_frequency,
        amplitude_scale: pump.amplitude_scale,
        walk_time: t,
        dt,
        max_photon_diff,
        relative_total_diff,
        max_mean_diff,
        direct_photons: a,
        decomposed_photons: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::build_chain;
    use crate::linalg::ZERO;
    use alloc::vec;

    fn single_mode() -> (CouplingGraph, EigenSystem) {
        let g = CouplingGraph::from_edges(&[ZERO], &[]).unwrap();
        let e = diagonalize(&g).unwrap();
        (g, e)
    }

    #[test]
    fn resonant_integral_is_linear() {
        let (_, eig) = single_mode();
        let p = PumpConfig::lasing_on_mode(1, 0, 0.0, 2.0).unwrap();
        let ep = pump_to_eigenbasis(&p, &eig).unwrap();
        let zp = integrated_pump(&ep, &eig, 3.0).unwrap();
        assert_eq!(zp.z, IntegratedProfile::Lasing(CVector::from_vec(vec![C64::new(6.0, 0.0)])));
        let zero = integrated_pump(&ep, &eig, 0.0).unwrap();
        assert_eq!(zero.z, IntegratedProfile::Lasing(CVector::from_vec(vec![ZERO])));
        assert!(integrated_pump(&ep, &eig, -1.0).is_err());
    }

    #[test]
    fn detuned_integral_is_periodic_and_bounded() {
        let (_, eig) = single_mode();
        let delta = 0.7;
        let ep = pump_to_eigenbasis(&PumpConfig::lasing_on_mode(1, 0, -delta, 1.0).unwrap(), &eig).unwrap();
        let z = |t: f64| match integrated_pump(&ep, &eig, t).unwrap().z {
            IntegratedProfile::Lasing(v) => v[0],
            _ => unreachable!(),
        };
        let period = 2.0 * core::f64::consts::PI / delta;
        assert!((z(1.3).norm() - z(1.3 + period).norm()).abs() < 1e-12);
        assert!((z(0.5 * period).norm() - 2.0 / delta).abs() < 1e-12);
        // midpoint quadrature
        let t = 2.9;
        let m = 20000;
        let h = t / m as f64;
        let quad: C64 = (0..m).map(|k| C64::from_polar(h, delta * (k as f64 + 0.5) * h)).sum();
        assert!((quad - z(t)).norm() < 1e-8);
    }

    #[test]
    fn zero_integral_gives_vacuum() {
        let (_, eig) = single_mode();
        for p in [
            PumpConfig::lasing_on_mode(1, 0, 0.0, 0.0).unwrap(),
            PumpConfig::squeezing_on_mode(1, 0, 0.0, 0.0).unwrap(),
        ] {
            let zp = integrated_pump(&pump_to_eigenbasis(&p, &eig).unwrap(), &eig, 4.0).unwrap();
            assert!(effective_input_state(&zp, &eig).unwrap().is_vacuum());
        }
    }

    #[test]
    fn lasing_input_state_single_mode() {
        let (_, eig) = single_mode();
        let zp = IntegratedPump {
            z: IntegratedProfile::Lasing(CVector::from_vec(vec![C64::new(0.0, 2.0)])),
            z_physical: IntegratedProfile::Lasing(CVector::from_vec(vec![C64::new(0.0, 2.0)])),
            walk_time: 2.0,
        };
        let s = effective_input_state(&zp, &eig).unwrap();
        assert!((s.mean[0] - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((s.occupations()[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn squeezing_input_state_single_mode() {
        let (_, eig) = single_mode();
        let r = 0.8;
        let z = CMatrix::from_element(1, 1, C64::new(r / 2.0, 0.0));
        let zp = IntegratedPump {
            z: IntegratedProfile::Squeezing(z.clone()),
            z_physical: IntegratedProfile::Squeezing(z),
            walk_time: 1.0,
        };
        let s = effective_input_state(&zp, &eig).unwrap();
        assert!((s.occupations()[0] - r.sinh().powi(2)).abs() < 1e-9);
    }

    #[test]
    fn lasing_factorisation_is_exact() {
        let g = build_chain(7, 1.0, 0.4).unwrap();
        let p = PumpConfig::lasing_on_mode(7, 2, 0.83, 0.5).unwrap();
        let r = decomposition_error(&g, &p, 6.0, 2e-3).unwrap();
        assert!(r.max_mean_diff < 1e-9, "{}", r.max_mean_diff);
        assert!(r.max_photon_diff < 1e-8);
    }

    #[test]
    fn factorisation_at_time_zero_is_vacuum() {
        let g = build_chain(3, 1.0, 0.4).unwrap();
        let p = PumpConfig::squeezing_on_mode(3, 1, 2.0, 0.3).unwrap();
        assert!(decompose_run(&g, &p, 0.0).unwrap().is_vacuum());
    }

    #[test]
    fn zero_pump_has_zero_gap() {
        let g = build_chain(3, 1.0, 0.4).unwrap();
        let p = PumpConfig::squeezing_on_mode(3, 1, 2.0, 0.0).unwrap();
        let r = decomposition_error(&g, &p, 2.0, 1e-2).unwrap();
        assert_eq!(r.max_photon_diff, 0.0);
    }
}
