//! Driven and passive evolution of multimode Gaussian states.
//!
//! The walk Hamiltonian is `H = Σ C_jk a†_j a_k + H_drive(t)` with either a
//! lasing drive `Σ γ_j(t) a†_j + h.c.` or a squeezing drive
//! `Σ Γ_jk(t) a†_j a†_k + h.c.`, both oscillating as `e^{-iω_p t}`. The
//! Heisenberg equation
//!
//! ```text
//! da/dt = -i C a - i γ(t) - 2i Γ(t) a†
//! ```
//!
//! is linear, so Gaussian states stay Gaussian and the first and second
//! moments obey closed equations. With `A = -iC` and `B = -2iΓ(t)`:
//!
//! ```text
//! dμ/dt = A μ + B μ* - i γ
//! dN/dt = A* N + N Aᵀ + B* M + M* B
//! dM/dt = A M + M Aᵀ + B N + Nᵀ B + B
//! ```
//!
//! where `N_jk = <δa†_j δa_k>` and `M_jk = <δa_j δa_k>` are centred moments.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use nalgebra::linalg::SymmetricEigen;

use crate::error::{invalid, Error, Result};
use crate::graphs::CouplingGraph;
use crate::linalg::{CMatrix, CVector, RMatrix, SparseMatrix, C64, I, ZERO};
use crate::spectral::{diagonalize, EigenSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DriveType {
    Lasing,
    Squeezing,
}

/// Spatial shape of the pump.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PumpProfile {
    /// `Γ_L`, one amplitude per mode
    Lasing(#[cfg_attr(feature = "serde", serde(with = "crate::linalg::serde_dense::vector"))] CVector),
    /// `Γ_S`, symmetric
    Squeezing(SparseMatrix),
}

/// Undepleted classical pump: `Γ₀ Γ e^{-iω_p t}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PumpConfig {
    pub profile: PumpProfile,
    pub pump_frequency: f64,
    pub amplitude_scale: f64,
}

impl PumpConfig {
    pub fn lasing(profile: CVector, pump_frequency: f64, amplitude_scale: f64) -> Result<Self> {
        Self::checked(PumpProfile::Lasing(profile), pump_frequency, amplitude_scale)
    }

    pub fn squeezing(profile: SparseMatrix, pump_frequency: f64, amplitude_scale: f64) -> Result<Self> {
        if let Some((dev, r, c)) = profile.symmetric_deviation() {
            if dev > 1e-12 {
                return Err(invalid(format!("squeezing profile not symmetric at ({r},{c}): {dev:e}")));
            }
        }
        Self::checked(PumpProfile::Squeezing(profile), pump_frequency, amplitude_scale)
    }

    /// Unit lasing pump on a single mode.
    pub fn lasing_on_mode(n: usize, mode: usize, pump_frequency: f64, amplitude_scale: f64) -> Result<Self> {
        if mode >= n {
            return Err(invalid(format!("pump mode {mode} out of range for {n} modes")));
        }
        let mut v = CVector::zeros(n);
        v[mode] = C64::new(1.0, 0.0);
        Self::lasing(v, pump_frequency, amplitude_scale)
    }

    /// Unit squeezing pump `a†_k²` on a single mode.
    pub fn squeezing_on_mode(n: usize, mode: usize, pump_frequency: f64, amplitude_scale: f64) -> Result<Self> {
        if mode >= n {
            return Err(invalid(format!("pump mode {mode} out of range for {n} modes")));
        }
        let m = SparseMatrix::from_triplets(n, [(mode, mode, C64::new(1.0, 0.0))]);
        Self::squeezing(m, pump_frequency, amplitude_scale)
    }

    fn checked(profile: PumpProfile, pump_frequency: f64, amplitude_scale: f64) -> Result<Self> {
        if !(amplitude_scale >= 0.0) || !amplitude_scale.is_finite() {
            return Err(invalid("amplitude scale must be finite and >= 0"));
        }
        if !pump_frequency.is_finite() {
            return Err(invalid("pump frequency must be finite"));
        }
        Ok(Self { profile, pump_frequency, amplitude_scale })
    }

    pub fn drive_type(&self) -> DriveType {
        match self.profile {
            PumpProfile::Lasing(_) => DriveType::Lasing,
            PumpProfile::Squeezing(_) => DriveType::Squeezing,
        }
    }

    pub fn n_modes(&self) -> usize {
        match &self.profile {
            PumpProfile::Lasing(v) => v.len(),
            PumpProfile::Squeezing(m) => m.dim(),
        }
    }

    pub fn with_frequency(&self, pump_frequency: f64) -> Self {
        Self { pump_frequency, ..self.clone() }
    }

    pub fn with_amplitude(&self, amplitude_scale: f64) -> Result<Self> {
        Self::checked(self.profile.clone(), self.pump_frequency, amplitude_scale)
    }

    fn max_entry(&self) -> f64 {
        match &self.profile {
            PumpProfile::Lasing(v) => v.iter().fold(0.0, |m, x| m.max(x.norm())),
            PumpProfile::Squeezing(s) => s.max_abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Basis {
    Physical,
    Eigen,
}

/// Multimode Gaussian state in centred complex moments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianState {
    /// μ_j = <a_j>
    #[cfg_attr(feature = "serde", serde(with = "crate::linalg::serde_dense::vector"))]
    pub mean: CVector,
    /// N_jk = <a†_j a_k> - μ*_j μ_k
    #[cfg_attr(feature = "serde", serde(with = "crate::linalg::serde_dense::matrix"))]
    pub number: CMatrix,
    /// M_jk = <a_j a_k> - μ_j μ_k
    #[cfg_attr(feature = "serde", serde(with = "crate::linalg::serde_dense::matrix"))]
    pub anomalous: CMatrix,
    pub basis: Basis,
}

impl GaussianState {
    pub fn vacuum(n: usize) -> Self {
        Self {
            mean: CVector::zeros(n),
            number: CMatrix::zeros(n, n),
            anomalous: CMatrix::zeros(n, n),
            basis: Basis::Physical,
        }
    }

    pub fn coherent(mean: CVector) -> Self {
        let n = mean.len();
        Self { mean, ..Self::vacuum(n) }
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len()
    }

    pub fn is_vacuum(&self) -> bool {
        self.mean.iter().all(|x| *x == ZERO)
            && self.number.iter().all(|x| *x == ZERO)
            && self.anomalous.iter().all(|x| *x == ZERO)
    }

    /// `N_jj + |μ_j|²` in the state's own basis.
    pub fn occupations(&self) -> Vec<f64> {
        (0..self.n_modes())
            .map(|j| self.number[(j, j)].re + self.mean[j].norm_sqr())
            .collect()
    }

    fn scale(&self) -> f64 {
        let m = crate::linalg::max_abs(&self.number).max(crate::linalg::max_abs(&self.anomalous));
        m.max(1.0)
    }

    /// Checks Hermiticity, symmetry, positivity of `N` and the uncertainty
    /// relation `σ + (i/2)Ω ⪰ 0`.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_modes();
        if self.number.shape() != (n, n) || self.anomalous.shape() != (n, n) {
            return Err(invalid("moment matrices do not match the mean length"));
        }
        let scale = self.scale();
        let herm = crate::linalg::max_abs_diff(&self.number, &self.number.adjoint());
        if herm > 1e-12 * scale {
            return Err(invalid(format!("number matrix not Hermitian ({herm:e})")));
        }
        let sym = crate::linalg::max_abs_diff(&self.anomalous, &self.anomalous.transpose());
        if sym > 1e-12 * scale {
            return Err(invalid(format!("anomalous matrix not symmetric ({sym:e})")));
        }
        let nh = (&self.number + self.number.adjoint()).scale(0.5);
        let min_n = SymmetricEigen::new(nh).eigenvalues.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        if min_n < -1e-10 * scale {
            return Err(invalid(format!("number matrix not positive semidefinite (min eigenvalue {min_n:e})")));
        }
        let phys = self.uncertainty_min_eigenvalue();
        if phys < -1e-9 * scale {
            return Err(invalid(format!("state violates the uncertainty relation ({phys:e})")));
        }
        Ok(())
    }

    /// Real quadrature covariance in `(x_1..x_n, p_1..p_n)` order with vacuum
    /// variance 1/2.
    pub fn quadrature_covariance(&self) -> RMatrix {
        let n = self.n_modes();
        let mut s = RMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            for k in 0..n {
                let nn = self.number[(j, k)];
                let m = self.anomalous[(j, k)];
                let d = if j == k { 0.5 } else { 0.0 };
                s[(j, k)] = m.re + nn.re + d;
                s[(n + j, n + k)] = -m.re + nn.re + d;
                s[(j, n + k)] = m.im + nn.im;
                s[(n + k, j)] = m.im + nn.im;
            }
        }
        s
    }

    /// Smallest eigenvalue of `σ + (i/2)Ω`.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let n = self.n_modes();
        let s = self.quadrature_covariance();
        let mut h = CMatrix::from_fn(2 * n, 2 * n, |a, b| C64::new(s[(a, b)], 0.0));
        for j in 0..n {
            h[(j, n + j)] += C64::new(0.0, 0.5);
            h[(n + j, j)] -= C64::new(0.0, 0.5);
        }
        SymmetricEigen::new(h).eigenvalues.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    /// Symplectic eigenvalues of the quadrature covariance, ascending. All
    /// equal 1/2 for a pure state.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let n = self.n_modes();
        let s = self.quadrature_covariance();
        let eig = SymmetricEigen::new(s.clone());
        let root = &eig.eigenvectors
            * RMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).sqrt()))
            * eig.eigenvectors.transpose();
        let rootc = root.map(|x| C64::new(x, 0.0));
        let mut omega = CMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            omega[(j, n + j)] = I;
            omega[(n + j, j)] = -I;
        }
        let k = &rootc * omega * &rootc;
        let k = (&k + k.adjoint()).scale(0.5);
        let mut nu: Vec<f64> = SymmetricEigen::new(k).eigenvalues.iter().map(|x| x.abs()).collect();
        nu.sort_by(f64::total_cmp);
        nu.into_iter().step_by(2).collect()
    }

    /// Re-expresses a physical-basis state in the eigenbasis:
    /// `μ → Tμ`, `N → T* N Tᵀ`, `M → T M Tᵀ`.
    pub fn to_eigenbasis(&self, eig: &EigenSystem) -> Result<Self> {
        self.require_basis(Basis::Physical)?;
        self.require_dim(eig.n_modes())?;
        let t = eig.transform();
        let tc = t.map(|x| x.conj());
        Ok(Self {
            mean: t * &self.mean,
            number: &tc * &self.number * t.transpose(),
            anomalous: t * &self.anomalous * t.transpose(),
            basis: Basis::Eigen,
        })
    }

    /// Inverse of [`to_eigenbasis`](Self::to_eigenbasis); needs a complete
    /// eigen-system.
    pub fn to_physical(&self, eig: &EigenSystem) -> Result<Self> {
        self.require_basis(Basis::Eigen)?;
        if !eig.is_complete() {
            return Err(invalid("transforming back to the physical basis needs a complete eigen-system"));
        }
        self.require_dim(eig.n_eigenmodes())?;
        let t = eig.transform();
        let td = t.adjoint();
        let tc = t.map(|x| x.conj());
        Ok(Self {
            mean: &td * &self.mean,
            number: t.transpose() * &self.number * &tc,
            anomalous: &td * &self.anomalous * &tc,
            basis: Basis::Physical,
        })
    }

    fn require_basis(&self, b: Basis) -> Result<()> {
        if self.basis != b {
            return Err(invalid(format!("state is in the {:?} basis, expected {:?}", self.basis, b)));
        }
        Ok(())
    }

    pub(crate) fn require_dim(&self, n: usize) -> Result<()> {
        if self.n_modes() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.n_modes() });
        }
        Ok(())
    }
}

/// Recorded driven evolution.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<GaussianState>,
    pub pump: PumpConfig,
    pub graph: CouplingGraph,
}

impl GaussianTrajectory {
    pub fn final_state(&self) -> &GaussianState {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Default step: 1e-3 of the fastest period, bounded through Gershgorin so no
/// diagonalisation is needed.
pub fn default_dt(graph: &CouplingGraph, pump: &PumpConfig) -> f64 {
    let growth = 2.0 * pump.amplitude_scale * pump.max_entry();
    let scale = graph
        .coupling()
        .gershgorin_radius()
        .max(pump.pump_frequency.abs())
        .max(growth);
    if scale > 0.0 {
        1e-3 * 2.0 * core::f64::consts::PI / scale
    } else {
        1e-3
    }
}

/// Fixed-step RK4 integrator of the moment equations. Owns a flat state
/// `[μ (n), N (n×n row-major), M (n×n row-major)]`.
pub struct MomentIntegrator<'a> {
    coupling: &'a SparseMatrix,
    pump: &'a PumpConfig,
    n: usize,
    second_moments: bool,
    time: f64,
    y: Vec<C64>,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl<'a> MomentIntegrator<'a> {
    pub fn new(graph: &'a CouplingGraph, pump: &'a PumpConfig, initial: Option<&GaussianState>) -> Result<Self> {
        let n = graph.n_modes();
        if pump.n_modes() != n {
            return Err(Error::DimensionMismatch { expected: n, found: pump.n_modes() });
        }
        let vac;
        let init = match initial {
            Some(s) => {
                s.require_dim(n)?;
                s.require_basis(Basis::Physical)?;
                s.validate()?;
                s
            }
            None => {
                vac = GaussianState::vacuum(n);
                &vac
            }
        };
        // a lasing drive leaves second moments untouched unless they start
        // non-zero (then the passive part still rotates them)
        let second_moments = pump.drive_type() == DriveType::Squeezing
            || init.number.iter().chain(init.anomalous.iter()).any(|x| *x != ZERO);
        let len = if second_moments { n + 2 * n * n } else { n };
        let mut y = vec![ZERO; len];
        y[..n].copy_from_slice(init.mean.as_slice());
        if second_moments {
            for j in 0..n {
                for k in 0..n {
                    y[n + j * n + k] = init.number[(j, k)];
                    y[n + n * n + j * n + k] = init.anomalous[(j, k)];
                }
            }
        }
        let init_n = init.number.clone();
        let init_m = init.anomalous.clone();
        let mut me = Self {
            coupling: graph.coupling(),
            pump,
            n,
            second_moments,
            time: 0.0,
            y,
            k: [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]],
            tmp: vec![ZERO; len],
        };
        if !second_moments {
            // keep the (zero) second moments for state snapshots
            debug_assert!(init_n.iter().chain(init_m.iter()).all(|x| *x == ZERO));
        }
        me.time = 0.0;
        Ok(me)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn mean(&self) -> &[C64] {
        &self.y[..self.n]
    }

    /// Per-mode photon numbers `N_jj + |μ_j|²` in the physical basis.
    pub fn photon_numbers(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|j| {
                let coh = self.y[j].norm_sqr();
                if self.second_moments {
                    coh + self.y[n + j * n + j].re
                } else {
                    coh
                }
            })
            .collect()
    }

    pub fn state(&self) -> GaussianState {
        let n = self.n;
        let mean = CVector::from_column_slice(&self.y[..n]);
        if !self.second_moments {
            return GaussianState::coherent(mean);
        }
        let number = CMatrix::from_fn(n, n, |j, k| self.y[n + j * n + k]);
        let anomalous = CMatrix::from_fn(n, n, |j, k| self.y[n + n * n + j * n + k]);
        GaussianState { mean, number, anomalous, basis: Basis::Physical }
    }

    /// Cheap sanity check: finite values and non-negative occupations.
    pub fn check(&self) -> Result<()> {
        if self.y.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NumericalInstability { time: self.time, detail: "non-finite moments".into() });
        }
        if self.second_moments {
            let n = self.n;
            let diag: Vec<f64> = (0..n).map(|j| self.y[n + j * n + j].re).collect();
            let max = diag.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
            if let Some(j) = diag.iter().position(|&x| x < -1e-8 * max) {
                return Err(Error::NumericalInstability {
                    time: self.time,
                    detail: format!("negative occupation {:e} on mode {j}", diag[j]),
                });
            }
        }
        Ok(())
    }

    pub fn step(&mut self, dt: f64) {
        let t = self.time;
        let len = self.y.len();
        let [k1, k2, k3, k4] = &mut self.k;
        rhs(self.coupling, self.pump, self.n, self.second_moments, t, &self.y, k1);
        for ((x, y), k) in self.tmp.iter_mut().zip(&self.y).zip(k1.iter()) {
            *x = y + k * (0.5 * dt);
        }
        rhs(self.coupling, self.pump, self.n, self.second_moments, t + 0.5 * dt, &self.tmp, k2);
        for ((x, y), k) in self.tmp.iter_mut().zip(&self.y).zip(k2.iter()) {
            *x = y + k * (0.5 * dt);
        }
        rhs(self.coupling, self.pump, self.n, self.second_moments, t + 0.5 * dt, &self.tmp, k3);
        for ((x, y), k) in self.tmp.iter_mut().zip(&self.y).zip(k3.iter()) {
            *x = y + k * dt;
        }
        rhs(self.coupling, self.pump, self.n, self.second_moments, t + dt, &self.tmp, k4);
        let w = dt / 6.0;
        for i in 0..len {
            self.y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * w;
        }
        self.time = t + dt;
    }
}

fn rhs(c: &SparseMatrix, pump: &PumpConfig, n: usize, second: bool, t: f64, y: &[C64], dy: &mut [C64]) {
    let phase = C64::from_polar(pump.amplitude_scale, -pump.pump_frequency * t);
    dy.iter_mut().for_each(|x| *x = ZERO);
    let (mu, rest) = y.split_at(n);
    let (dmu, drest) = dy.split_at_mut(n);

    for (r, col, v) in c.iter() {
        dmu[r] += -I * v * mu[col];
    }
    match &pump.profile {
        PumpProfile::Lasing(g) => {
            for r in 0..n {
                dmu[r] += -I * phase * g[r];
            }
        }
        PumpProfile::Squeezing(g) => {
            for (r, col, v) in g.iter() {
                let b = -2.0 * I * phase * v;
                dmu[r] += b * mu[col].conj();
            }
        }
    }
    if !second {
        return;
    }

    let nn = n * n;
    let (num, anom) = rest.split_at(nn);
    let (dnum, danom) = drest.split_at_mut(nn);
    for (r, col, v) in c.iter() {
        let a = I * v.conj();
        let b = -I * v;
        for k in 0..n {
            // A* N and A M (row r picks row col)
            dnum[r * n + k] += a * num[col * n + k];
            danom[r * n + k] += b * anom[col * n + k];
            // N Aᵀ and M Aᵀ (column r picks column col)
            dnum[k * n + r] += b * num[k * n + col];
            danom[k * n + r] += b * anom[k * n + col];
        }
    }
    if let PumpProfile::Squeezing(g) = &pump.profile {
        for (r, col, v) in g.iter() {
            let b = -2.0 * I * phase * v;
            let bc = b.conj();
            for k in 0..n {
                // B* M and M* B
                dnum[r * n + k] += bc * anom[col * n + k];
                dnum[k * n + col] += anom[k * n + r].conj() * b;
                // B N and Nᵀ B
                danom[r * n + k] += b * num[col * n + k];
                danom[k * n + col] += b * num[r * n + k];
            }
            danom[r * n + col] += b;
        }
    }
}

/// Integrates the exact moment equations with fixed-step RK4, recording every
/// `record_every` steps plus the initial and final times.
pub fn evolve_driven(
    graph: &CouplingGraph,
    pump: &PumpConfig,
    t_final: f64,
    dt: f64,
    initial: Option<&GaussianState>,
    record_every: usize,
) -> Result<GaussianTrajectory> {
    let (steps, h) = step_plan(t_final, dt)?;
    if record_every == 0 {
        return Err(invalid("record_every must be >= 1"));
    }
    let mut integ = MomentIntegrator::new(graph, pump, initial)?;
    let mut times = vec![0.0];
    let mut states = vec![integ.state()];
    for s in 1..=steps {
        integ.step(h);
        if s % record_every == 0 || s == steps {
            integ.check()?;
            times.push(s as f64 * h);
            states.push(integ.state());
        }
    }
    Ok(GaussianTrajectory { times, states, pump: pump.clone(), graph: graph.clone() })
}

/// Like [`evolve_driven`] but keeps only the final state.
pub fn evolve_final(
    graph: &CouplingGraph,
    pump: &PumpConfig,
    t_final: f64,
    dt: f64,
    initial: Option<&GaussianState>,
) -> Result<GaussianState> {
    let (steps, h) = step_plan(t_final, dt)?;
    let mut integ = MomentIntegrator::new(graph, pump, initial)?;
    for s in 1..=steps {
        integ.step(h);
        if s % 4096 == 0 {
            integ.check()?;
        }
    }
    integ.check()?;
    Ok(integ.state())
}

/// Number of steps and the adjusted step that lands exactly on `t_final`.
pub fn step_plan(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(invalid("t_final must be positive"));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt must be positive"));
    }
    if dt >= t_final {
        return Err(invalid(format!("dt = {dt} must be smaller than t_final = {t_final}")));
    }
    let steps = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((steps, t_final / steps as f64))
}

/// Passive walk `U = exp(-iCt)`: `μ → Uμ`, `N → U* N Uᵀ`, `M → U M Uᵀ`.
pub fn evolve_passive(graph: &CouplingGraph, state: &GaussianState, t: f64) -> Result<GaussianState> {
    state.require_dim(graph.n_modes())?;
    let eig = diagonalize(graph)?;
    evolve_passive_with(&eig, state, t)
}

/// [`evolve_passive`] with a precomputed eigen-system.
pub fn evolve_passive_with(eig: &EigenSystem, state: &GaussianState, t: f64) -> Result<GaussianState> {
    let phases = CVector::from_iterator(
        eig.n_eigenmodes(),
        eig.frequencies().iter().map(|w| C64::from_polar(1.0, -w * t)),
    );
    match state.basis {
        Basis::Eigen => {
            state.require_dim(eig.n_eigenmodes())?;
            let n = state.n_modes();
            Ok(GaussianState {
                mean: state.mean.component_mul(&phases),
                number: CMatrix::from_fn(n, n, |j, k| phases[j].conj() * state.number[(j, k)] * phases[k]),
                anomalous: CMatrix::from_fn(n, n, |j, k| phases[j] * state.anomalous[(j, k)] * phases[k]),
                basis: Basis::Eigen,
            })
        }
        Basis::Physical => {
            if !eig.is_complete() {
                return Err(invalid("passive evolution needs a complete eigen-system"));
            }
            state.require_dim(eig.n_modes())?;
            let t_mat = eig.transform();
            let u = t_mat.adjoint() * CMatrix::from_diagonal(&phases) * t_mat;
            let uc = u.map(|x| x.conj());
            Ok(GaussianState {
                mean: &u * &state.mean,
                number: &uc * &state.number * u.transpose(),
                anomalous: &u * &state.anomalous * u.transpose(),
                basis: Basis::Physical,
            })
        }
    }
}

/// Occupation above which the top Fock level counts as leakage.
pub const FOCK_LEAKAGE_TOL: f64 = 1e-8;

/// Brute-force evolution of the full state vector in a truncated Fock space
/// (`cutoff` levels per mode) under the same time-dependent Hamiltonian.
/// Returns `<a†_j a_j>` per mode. Meant as an independent check of the
/// Gaussian engine on at most three modes.
pub fn fock_oracle_evolve(graph: &CouplingGraph, pump: &PumpConfig, t: f64, dt: f64, cutoff: usize) -> Result<Vec<f64>> {
    let n = graph.n_modes();
    if n > 3 {
        return Err(invalid("the Fock oracle handles at most 3 modes"));
    }
    if pump.n_modes() != n {
        return Err(Error::DimensionMismatch { expected: n, found: pump.n_modes() });
    }
    if cutoff < 2 {
        return Err(invalid("cutoff must be at least 2"));
    }
    let dim = (0..n).try_fold(1usize, |d, _| d.checked_mul(cutoff)).filter(|&d| d <= 1_000_000);
    let dim = dim.ok_or_else(|| invalid("cutoff^n_modes exceeds 10^6"))?;
    let (steps, h) = step_plan(t, dt)?;

    let fock = FockSpace::new(n, cutoff);
    let mut psi = vec![ZERO; dim];
    psi[0] = C64::new(1.0, 0.0);
    let mut k: [Vec<C64>; 4] = [vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim]];
    let mut tmp = vec![ZERO; dim];
    let mut time = 0.0;
    for _ in 0..steps {
        let [k1, k2, k3, k4] = &mut k;
        fock.apply_generator(graph.coupling(), pump, time, &psi, k1);
        for i in 0..dim {
            tmp[i] = psi[i] + k1[i] * (0.5 * h);
        }
        fock.apply_generator(graph.coupling(), pump, time + 0.5 * h, &tmp, k2);
        for i in 0..dim {
            tmp[i] = psi[i] + k2[i] * (0.5 * h);
        }
        fock.apply_generator(graph.coupling(), pump, time + 0.5 * h, &tmp, k3);
        for i in 0..dim {
            tmp[i] = psi[i] + k3[i] * h;
        }
        fock.apply_generator(graph.coupling(), pump, time + h, &tmp, k4);
        for i in 0..dim {
            psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
        time += h;
    }

    let mut leak = 0.0;
    let mut numbers = vec![0.0; n];
    for (idx, amp) in psi.iter().enumerate() {
        let p = amp.norm_sqr();
        let occ = fock.occupations(idx);
        if occ.iter().any(|&o| o == cutoff - 1) {
            leak += p;
        }
        for j in 0..n {
            numbers[j] += p * occ[j] as f64;
        }
    }
    if leak > FOCK_LEAKAGE_TOL {
        return Err(Error::CutoffTooSmall { leakage: leak, threshold: FOCK_LEAKAGE_TOL });
    }
    Ok(numbers)
}

struct FockSpace {
    n: usize,
    cutoff: usize,
    strides: Vec<usize>,
    sqrt: Vec<f64>,
}

impl FockSpace {
    fn new(n: usize, cutoff: usize) -> Self {
        let strides = (0..n).map(|j| cutoff.pow(j as u32)).collect();
        let sqrt = (0..=cutoff).map(|k| (k as f64).sqrt()).collect();
        Self { n, cutoff, strides, sqrt }
    }

    fn occupations(&self, idx: usize) -> Vec<usize> {
        (0..self.n).map(|j| (idx / self.strides[j]) % self.cutoff).collect()
    }

    fn occ(&self, idx: usize, j: usize) -> usize {
        (idx / self.strides[j]) % self.cutoff
    }

    /// a_j |idx>
    fn lower(&self, idx: usize, j: usize) -> Option<(usize, f64)> {
        let o = self.occ(idx, j);
        (o > 0).then(|| (idx - self.strides[j], self.sqrt[o]))
    }

    /// a†_j |idx>, truncated at the top level
    fn raise(&self, idx: usize, j: usize) -> Option<(usize, f64)> {
        let o = self.occ(idx, j);
        (o + 1 < self.cutoff).then(|| (idx + self.strides[j], self.sqrt[o + 1]))
    }

    /// out = -i H(t) psi
    fn apply_generator(&self, c: &SparseMatrix, pump: &PumpConfig, t: f64, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|x| *x = ZERO);
        let phase = C64::from_polar(pump.amplitude_scale, -pump.pump_frequency * t);
        for (idx, &amp) in psi.iter().enumerate() {
            if amp == ZERO {
                continue;
            }
            // Σ C_jk a†_j a_k
            for (j, k, v) in c.iter() {
                if let Some((i1, f1)) = self.lower(idx, k) {
                    if let Some((i2, f2)) = self.raise(i1, j) {
                        out[i2] += v * amp * (f1 * f2);
                    }
                }
            }
            match &pump.profile {
                PumpProfile::Lasing(g) => {
                    for j in 0..self.n {
                        let gj = phase * g[j];
                        if gj == ZERO {
                            continue;
                        }
                        if let Some((i1, f)) = self.raise(idx, j) {
                            out[i1] += gj * amp * f;
                        }
                        if let Some((i1, f)) = self.lower(idx, j) {
                            out[i1] += gj.conj() * amp * f;
                        }
                    }
                }
                PumpProfile::Squeezing(g) => {
                    for (j, k, v) in g.iter() {
                        let gjk = phase * v;
                        if let Some((i1, f1)) = self.raise(idx, k) {
                            if let Some((i2, f2)) = self.raise(i1, j) {
                                out[i2] += gjk * amp * (f1 * f2);
                            }
                        }
                        if let Some((i1, f1)) = self.lower(idx, k) {
                            if let Some((i2, f2)) = self.lower(i1, j) {
                                out[i2] += gjk.conj() * amp * (f1 * f2);
                            }
                        }
                    }
                }
            }
        }
        for x in out.iter_mut() {
            *x *= -I;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::build_chain;

    fn single_mode(freq: f64) -> CouplingGraph {
        CouplingGraph::from_edges(&[C64::new(freq, 0.0)], &[]).unwrap()
    }

    #[test]
    fn constant_lasing_on_free_mode() {
        let g = single_mode(0.0);
        let p = PumpConfig::lasing_on_mode(1, 0, 0.0, 1.0).unwrap();
        let tr = evolve_driven(&g, &p, 3.0, 0.01, None, 10).unwrap();
        let s = tr.final_state();
        assert!((s.mean[0] - C64::new(0.0, -3.0)).norm() < 1e-12);
        assert!(s.number.iter().all(|x| *x == ZERO));
        assert_eq!(tr.times.first(), Some(&0.0));
        assert!((tr.times.last().unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_mode_squeezer_closed_form() {
        let g = single_mode(0.0);
        let p = PumpConfig::squeezing_on_mode(1, 0, 0.0, 0.1).unwrap();
        let tr = evolve_driven(&g, &p, 5.0, 1e-3, None, 1000).unwrap();
        let n = tr.final_state().number[(0, 0)].re;
        let want = 1f64.sinh().powi(2);
        assert!((n - want).abs() < 1e-9, "{n} vs {want}");
        assert!(tr.final_state().mean[0] == ZERO);
    }

    #[test]
    fn dt_must_be_below_t_final() {
        let g = single_mode(0.0);
        let p = PumpConfig::lasing_on_mode(1, 0, 0.0, 1.0).unwrap();
        assert!(matches!(evolve_driven(&g, &p, 1.0, 1.0, None, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(evolve_driven(&g, &p, 1.0, -0.1, None, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = build_chain(3, 1.0, 0.5).unwrap();
        let p = PumpConfig::lasing_on_mode(2, 0, 0.0, 1.0).unwrap();
        assert!(matches!(evolve_driven(&g, &p, 1.0, 0.1, None, 1), Err(Error::DimensionMismatch { .. })));
        let s = GaussianState::vacuum(2);
        assert!(evolve_passive(&g, &s, 1.0).is_err());
    }

    #[test]
    fn blow_up_reports_instability() {
        let g = single_mode(0.0);
        let p = PumpConfig::squeezing_on_mode(1, 0, 0.0, 50.0).unwrap();
        let err = evolve_driven(&g, &p, 20.0, 0.1, None, 1).unwrap_err();
        assert!(matches!(err, Error::NumericalInstability { .. }), "{err:?}");
    }

    #[test]
    fn passive_beamsplitter_swap() {
        let c = 0.7;
        let g = build_chain(2, 0.0, c).unwrap();
        let s = GaussianState::coherent(CVector::from_vec(vec![C64::new(1.0, 0.0), ZERO]));
        let out = evolve_passive(&g, &s, core::f64::consts::PI / (2.0 * c)).unwrap();
        assert!(out.mean[0].norm() < 1e-12);
        assert!((out.mean[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn passive_identity_and_vacuum() {
        let g = build_chain(4, 1.0, 0.3).unwrap();
        let s = GaussianState::coherent(CVector::from_vec(vec![C64::new(0.3, 0.1); 4]));
        let same = evolve_passive(&g, &s, 0.0).unwrap();
        assert!(crate::linalg::max_abs_diff_vec(&same.mean, &s.mean) < 1e-14);
        let vac = evolve_passive(&g, &GaussianState::vacuum(4), 2.5).unwrap();
        assert!(vac.is_vacuum());
    }

    #[test]
    fn fock_oracle_lasing_closed_form() {
        let g = single_mode(0.0);
        let p = PumpConfig::lasing_on_mode(1, 0, 0.0, 1.0).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let n = fock_oracle_evolve(&g, &p, t, 1e-3, 40).unwrap();
            assert!((n[0] - t * t).abs() < 1e-8, "t={t}: {}", n[0]);
        }
    }

    #[test]
    fn fock_oracle_zero_pump_keeps_vacuum() {
        let g = build_chain(2, 1.0, 0.5).unwrap();
        let p = PumpConfig::squeezing_on_mode(2, 0, 0.0, 0.0).unwrap();
        let n = fock_oracle_evolve(&g, &p, 1.0, 1e-2, 5).unwrap();
        assert!(n.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn fock_oracle_detects_truncation() {
        let g = single_mode(0.0);
        let p = PumpConfig::lasing_on_mode(1, 0, 0.0, 1.0).unwrap();
        assert!(matches!(fock_oracle_evolve(&g, &p, 2.0, 1e-2, 6), Err(Error::CutoffTooSmall { .. })));
        let big = build_chain(4, 0.0, 1.0).unwrap();
        let p4 = PumpConfig::lasing_on_mode(4, 0, 0.0, 1.0).unwrap();
        assert!(fock_oracle_evolve(&big, &p4, 1.0, 0.1, 4).is_err());
    }

    #[test]
    fn basis_round_trip() {
        let g = build_chain(3, 1.0, 0.4).unwrap();
        let eig = diagonalize(&g).unwrap();
        let p = PumpConfig::squeezing_on_mode(3, 1, 2.0, 0.2).unwrap();
        let s = evolve_driven(&g, &p, 1.0, 1e-2, None, 100).unwrap().final_state().clone();
        let back = s.to_eigenbasis(&eig).unwrap().to_physical(&eig).unwrap();
        assert!(crate::linalg::max_abs_diff(&back.number, &s.number) < 1e-13);
        assert!(crate::linalg::max_abs_diff(&back.anomalous, &s.anomalous) < 1e-13);
    }

    #[test]
    fn vacuum_is_pure_and_physical() {
        let v = GaussianState::vacuum(3);
        v.validate().unwrap();
        assert!(v.symplectic_eigenvalues().iter().all(|&x| (x - 0.5).abs() < 1e-12));
        let mut bad = GaussianState::vacuum(1);
        bad.number[(0, 0)] = C64::new(-0.5, 0.0);
        assert!(bad.validate().is_err());
    }
}
