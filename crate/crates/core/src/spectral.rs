//! Eigenmodes of coupling graphs and the eigenbasis form of pump profiles.
//!
//! Conventions: the transform `T` maps physical to eigenmode operators,
//! `A = T a`, so row `k` of `T` is eigenmode `k` written in the physical basis
//! and `T C T† = diag(Ω)`. Each row is phased so that its largest-magnitude
//! component (the first one, on ties) is real and positive.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)]
use num_traits::Float;
use nalgebra::linalg::SymmetricEigen;

use crate::dynamics::{PumpConfig, PumpProfile};
use crate::error::{invalid, Error, Result};
use crate::graphs::{glued_trees_column_chain, CouplingGraph, UNIT_CHAIN_EDGE_WEIGHT};
use crate::linalg::{CMatrix, CVector, RMatrix, SparseMatrix, C64, ZERO};

/// Relative magnitude within which two components count as tied for the phase
/// convention.
const PHASE_TIE_TOL: f64 = 1e-9;

/// Eigenfrequencies (ascending) and the physical-to-eigenmode transform.
///
/// A `complete` system has one row per physical mode. Partial systems come
/// from Krylov projection and span only the modes reachable from some seed
/// vectors; their rows are still exact, orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenSystem {
    frequencies: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::linalg::serde_dense::matrix"))]
    transform: CMatrix,
    complete: bool,
}

impl EigenSystem {
    /// Assembles a system from parts, sorting by frequency and applying the
    /// phase convention. Rows of `transform` are eigenvectors.
    pub fn from_parts(frequencies: Vec<f64>, transform: CMatrix) -> Result<Self> {
        if frequencies.len() != transform.nrows() {
            return Err(Error::DimensionMismatch { expected: transform.nrows(), found: frequencies.len() });
        }
        let complete = transform.nrows() == transform.ncols();
        let mut order: Vec<usize> = (0..frequencies.len()).collect();
        order.sort_by(|&a, &b| frequencies[a].total_cmp(&frequencies[b]));
        let n = transform.ncols();
        let mut t = CMatrix::zeros(order.len(), n);
        for (row, &k) in order.iter().enumerate() {
            t.set_row(row, &transform.row(k));
            fix_phase(&mut t, row);
        }
        let frequencies = order.iter().map(|&k| frequencies[k]).collect();
        Ok(Self { frequencies, transform: t, complete })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn transform(&self) -> &CMatrix {
        &self.transform
    }

    pub fn n_modes(&self) -> usize {
        self.transform.ncols()
    }

    pub fn n_eigenmodes(&self) -> usize {
        self.transform.nrows()
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn max_abs_frequency(&self) -> f64 {
        self.frequencies.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// Index ranges of (numerically) degenerate frequencies.
    pub fn degenerate_clusters(&self, tol: f64) -> Vec<Range<usize>> {
        let scale = self.max_abs_frequency().max(1.0);
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.frequencies.len() {
            if k == self.frequencies.len() || self.frequencies[k] - self.frequencies[k - 1] > tol * scale {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// Mean vector in the eigenbasis, `T μ`.
    pub fn to_eigen_vector(&self, v: &CVector) -> CVector {
        &self.transform * v
    }

    /// Physical vector from eigenmode amplitudes, `T† v`. Exact only when the
    /// vector lies in the span of the rows.
    pub fn to_physical_vector(&self, v: &CVector) -> CVector {
        self.transform.adjoint() * v
    }

    /// max |T T† - I|
    pub fn unitarity_error(&self) -> f64 {
        let p = &self.transform * self.transform.adjoint();
        let id = CMatrix::identity(p.nrows(), p.ncols());
        crate::linalg::max_abs_diff(&p, &id)
    }

    /// max |T C T† - diag(Ω)|
    pub fn diagonalization_error(&self, coupling: &SparseMatrix) -> f64 {
        let c = coupling.to_dense();
        let d = &self.transform * c * self.transform.adjoint();
        let mut target = CMatrix::zeros(d.nrows(), d.ncols());
        for (k, w) in self.frequencies.iter().enumerate() {
            target[(k, k)] = C64::new(*w, 0.0);
        }
        crate::linalg::max_abs_diff(&d, &target)
    }

    /// Largest eigen-equation residual max_k |C v_k - Ω_k v_k| using the sparse
    /// coupling only.
    pub fn residual(&self, coupling: &SparseMatrix) -> f64 {
        let n = self.n_modes();
        let mut v = alloc::vec![ZERO; n];
        let mut cv = alloc::vec![ZERO; n];
        let mut worst = 0.0f64;
        for k in 0..self.n_eigenmodes() {
            for (j, x) in v.iter_mut().enumerate() {
                *x = self.transform[(k, j)].conj();
            }
            coupling.mul_vec(&v, &mut cv);
            for j in 0..n {
                worst = worst.max((cv[j] - v[j] * self.frequencies[k]).norm());
            }
        }
        worst
    }
}

fn fix_phase(t: &mut CMatrix, row: usize) {
    let n = t.ncols();
    let max = (0..n).fold(0.0f64, |m, j| m.max(t[(row, j)].norm()));
    if max == 0.0 {
        return;
    }
    let pivot = (0..n)
        .find(|&j| t[(row, j)].norm() >= max * (1.0 - PHASE_TIE_TOL))
        .unwrap_or(0);
    let p = t[(row, pivot)];
    let rot = p.conj() / p.norm();
    for j in 0..n {
        t[(row, j)] *= rot;
    }
    t[(row, pivot)] = C64::new(t[(row, pivot)].re, 0.0);
}

/// Dense diagonalisation of the coupling matrix.
pub fn diagonalize(graph: &CouplingGraph) -> Result<EigenSystem> {
    diagonalize_matrix(graph.coupling())
}

pub fn diagonalize_matrix(coupling: &SparseMatrix) -> Result<EigenSystem> {
    let n = coupling.dim();
    let max_iter = 100 * n.max(10);
    let (values, t) = if coupling.is_real() {
        let m = RMatrix::from_fn(n, n, |i, j| coupling.get(i, j).re);
        let eig = SymmetricEigen::try_new(m, f64::EPSILON, max_iter)
            .ok_or(Error::NonConvergence { size: n, residual: f64::NAN })?;
        let t = CMatrix::from_fn(n, n, |k, j| C64::new(eig.eigenvectors[(j, k)], 0.0));
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), t)
    } else {
        let m = coupling.to_dense();
        let eig = SymmetricEigen::try_new(m, f64::EPSILON, max_iter)
            .ok_or(Error::NonConvergence { size: n, residual: f64::NAN })?;
        let t = CMatrix::from_fn(n, n, |k, j| eig.eigenvectors[(j, k)].conj());
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), t)
    };
    let sys = EigenSystem::from_parts(values, t)?;
    let residual = sys.residual(coupling);
    if !(residual <= 1e-9 * coupling.max_abs().max(1.0)) {
        return Err(Error::NonConvergence { size: n, residual });
    }
    Ok(sys)
}

/// Closed-form eigen-system of a uniform chain:
/// `Ω_j = onsite + 2 coupling cos(jπ/(n+1))`,
/// `T_{j,k} = sqrt(2/(n+1)) sin(jkπ/(n+1))`, for `j, k = 1..n`.
pub fn chain_eigensystem_analytic(n: usize, onsite: f64, coupling: f64) -> Result<EigenSystem> {
    if n == 0 {
        return Err(invalid("chain needs n >= 1"));
    }
    let h = core::f64::consts::PI / (n as f64 + 1.0);
    let norm = (2.0 / (n as f64 + 1.0)).sqrt();
    let freqs = (1..=n).map(|j| onsite + 2.0 * coupling * (j as f64 * h).cos()).collect();
    let t = CMatrix::from_fn(n, n, |j, k| {
        C64::new(norm * (((j + 1) * (k + 1)) as f64 * h).sin(), 0.0)
    });
    EigenSystem::from_parts(freqs, t)
}

/// Position of the chain eigenmode with label `j` (1-based, `Ω_j` decreasing in
/// `j` for positive coupling) inside the ascending frequency order.
pub fn chain_label_to_index(n: usize, j: usize, coupling: f64) -> Result<usize> {
    if j == 0 || j > n {
        return Err(invalid(format!("eigenmode label {j} outside 1..={n}")));
    }
    Ok(if coupling >= 0.0 { n - j } else { j - 1 })
}

/// Chebyshev polynomial of the second kind by recurrence.
pub fn chebyshev_u(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if n == 0 {
        return prev;
    }
    for _ in 1..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Sign-change bracketing on a uniform grid followed by bisection to 1e-12.
fn grid_roots(f: impl Fn(f64) -> f64, lower: f64, upper: f64, grid_points: usize, expected: usize) -> Result<Vec<f64>> {
    let mut roots = Vec::new();
    let step = (upper - lower) / grid_points as f64;
    let mut a = lower;
    let mut fa = f(a);
    for i in 1..=grid_points {
        let b = lower + step * i as f64;
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if flo * fm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    if fa == 0.0 {
        roots.push(a);
    }
    if roots.len() != expected {
        return Err(Error::RootBracketing {
            lower,
            upper,
            grid_points,
            detail: format!("found {} sign changes, expected {expected}", roots.len()),
        });
    }
    Ok(roots)
}

/// Half-width of the Chebyshev-variable interval searched for roots: the
/// Gershgorin bound of the unit-convention defect chain, halved.
const CHEBYSHEV_HALF_WIDTH: f64 = 0.5 * (1.0 + core::f64::consts::SQRT_2);

/// Real roots of `U_depth(x) - U_{depth-1}(x)`, ascending.
pub fn defect_chain_eigenvalues(depth: usize) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(invalid("depth must be >= 1"));
    }
    let f = |x: f64| chebyshev_u(depth, x) - chebyshev_u(depth - 1, x);
    grid_roots(f, -CHEBYSHEV_HALF_WIDTH, CHEBYSHEV_HALF_WIDTH, 16 * depth, depth)
}

/// Eigenvalues of the unit-convention column chain from its mirror-sector
/// characteristic equations `U_{d+1}(x) = ±sqrt(2) U_d(x)`, with `λ = 2x`.
pub fn defect_chain_secular_eigenvalues(depth: usize) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(invalid("depth must be >= 1"));
    }
    let s2 = core::f64::consts::SQRT_2;
    let grid = 64 * (depth + 1);
    let mut all = Vec::with_capacity(2 * depth + 2);
    for sign in [1.0, -1.0] {
        let f = |x: f64| chebyshev_u(depth + 1, x) - sign * s2 * chebyshev_u(depth, x);
        all.extend(grid_roots(f, -CHEBYSHEV_HALF_WIDTH, CHEBYSHEV_HALF_WIDTH, grid, depth + 1)?);
    }
    let mut out: Vec<f64> = all.into_iter().map(|x| 2.0 * x).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// How a Chebyshev variable `x` is mapped to a chain eigenvalue `λ` (unit
/// coupling).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ChebyshevMapping {
    /// λ = x
    Identity,
    /// λ = 2x, i.e. x = λ / (2C)
    HalfCoupling,
}

impl ChebyshevMapping {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::HalfCoupling => 2.0 * x,
        }
    }
}

/// Result of matching Chebyshev-condition roots against the numerically
/// diagonalised column chain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MappingReport {
    pub depth: usize,
    pub mapping: ChebyshevMapping,
    pub roots: Vec<f64>,
    /// distance from each mapped root to the nearest chain eigenvalue
    pub mismatch: Vec<f64>,
    pub max_mismatch: f64,
}

/// Tries each argument convention and keeps the one whose mapped roots sit
/// closest to the spectrum of the unit-convention column chain.
pub fn validate_defect_chain_mapping(depth: usize) -> Result<MappingReport> {
    let roots = defect_chain_eigenvalues(depth)?;
    let chain = glued_trees_column_chain(depth, UNIT_CHAIN_EDGE_WEIGHT)?;
    let spectrum = diagonalize(&chain)?.frequencies;
    let mut best: Option<MappingReport> = None;
    for mapping in [ChebyshevMapping::Identity, ChebyshevMapping::HalfCoupling] {
        let mismatch: Vec<f64> = roots
            .iter()
            .map(|&x| {
                let l = mapping.apply(x);
                spectrum.iter().fold(f64::INFINITY, |m, &w| m.min((w - l).abs()))
            })
            .collect();
        let max_mismatch = mismatch.iter().fold(0.0f64, |m, &d| m.max(d));
        if best.as_ref().is_none_or(|b| max_mismatch < b.max_mismatch) {
            best = Some(MappingReport { depth, mapping, roots: roots.clone(), mismatch, max_mismatch });
        }
    }
    Ok(best.expect("at least one mapping"))
}

/// Krylov projection: the smallest invariant subspace of `C` containing the
/// unit vectors on `seeds`, diagonalised exactly. Every eigenmode with
/// non-zero weight on a seed mode is captured (inside a degenerate eigenspace,
/// the captured vector is the projection of the seeds).
pub fn krylov_eigensystem(graph: &CouplingGraph, seeds: &[usize]) -> Result<EigenSystem> {
    let n = graph.n_modes();
    if seeds.is_empty() {
        return Err(invalid("krylov projection needs at least one seed"));
    }
    if let Some(&s) = seeds.iter().find(|&&s| s >= n) {
        return Err(invalid(format!("seed {s} out of range for {n} modes")));
    }
    let c = graph.coupling();
    let drop_tol = 1e-10 * c.max_abs().max(1.0);

    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut queue: alloc::collections::VecDeque<Vec<C64>> = seeds
        .iter()
        .map(|&s| {
            let mut v = alloc::vec![ZERO; n];
            v[s] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    while let Some(mut v) = queue.pop_front() {
        let scale = norm(&v);
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let proj: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let nv = norm(&v);
        if nv <= drop_tol * scale.max(1.0) || nv == 0.0 {
            continue;
        }
        for x in &mut v {
            *x /= nv;
        }
        let mut cv = alloc::vec![ZERO; n];
        c.mul_vec(&v, &mut cv);
        basis.push(v);
        queue.push_back(cv);
        if basis.len() > n {
            return Err(Error::NonConvergence { size: n, residual: nv });
        }
    }

    let m = basis.len();
    let q = CMatrix::from_fn(n, m, |i, k| basis[k][i]);
    let mut cq = CMatrix::zeros(n, m);
    let mut out = alloc::vec![ZERO; n];
    for k in 0..m {
        c.mul_vec(&basis[k], &mut out);
        for i in 0..n {
            cq[(i, k)] = out[i];
        }
    }
    let h = q.adjoint() * &cq;
    let h = (&h + h.adjoint()).scale(0.5);
    let small = diagonalize_matrix(&SparseMatrix::from_dense(&h))?;
    // eigenvector k of C is Q y_k with y_k = conj(row k of the small transform)
    let t = small.transform() * q.adjoint();
    let sys = EigenSystem::from_parts(small.frequencies.clone(), t)?;
    let residual = sys.residual(c);
    if !(residual <= 1e-8 * c.max_abs().max(1.0)) {
        return Err(Error::NonConvergence { size: n, residual });
    }
    Ok(sys)
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenbasis form of a pump profile (including the amplitude scale Γ₀).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EigenProfile {
    /// `S = T Γ₀Γ_L`, `Δ_k = Ω_k - ω_p`
    Lasing {
        #[cfg_attr(feature = "serde", serde(with = "crate::linalg::serde_dense::vector"))]
        s: CVector,
        mismatch: Vec<f64>,
    },
    /// `S = T Γ₀Γ_S Tᵀ`, `Δ_kk' = Ω_k + Ω_k' - ω_p`
    Squeezing {
        #[cfg_attr(feature = "serde", serde(with = "crate::linalg::serde_dense::matrix"))]
        s: CMatrix,
        #[cfg_attr(feature = "serde", serde(with = "crate::linalg::serde_dense::matrix"))]
        mismatch: RMatrix,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenPump {
    pub profile: EigenProfile,
    pub pump_frequency: f64,
    pub frequencies: Vec<f64>,
}

impl EigenPump {
    /// Largest |S| entry.
    pub fn max_drive(&self) -> f64 {
        match &self.profile {
            EigenProfile::Lasing { s, .. } => s.iter().fold(0.0, |m, x| m.max(x.norm())),
            EigenProfile::Squeezing { s, .. } => s.iter().fold(0.0, |m, x| m.max(x.norm())),
        }
    }
}

pub fn pump_to_eigenbasis(pump: &PumpConfig, eig: &EigenSystem) -> Result<EigenPump> {
    let n = eig.n_modes();
    if pump.n_modes() != n {
        return Err(Error::DimensionMismatch { expected: n, found: pump.n_modes() });
    }
    let w = eig.frequencies();
    let wp = pump.pump_frequency;
    let t = eig.transform();
    let g0 = pump.amplitude_scale;
    let profile = match &pump.profile {
        PumpProfile::Lasing(gamma) => EigenProfile::Lasing {
            s: (t * gamma).scale(g0),
            mismatch: w.iter().map(|x| x - wp).collect(),
        },
        PumpProfile::Squeezing(gamma) => {
            let dense = gamma.to_dense();
            EigenProfile::Squeezing {
                s: (t * dense * t.transpose()).scale(g0),
                mismatch: RMatrix::from_fn(w.len(), w.len(), |a, b| w[a] + w[b] - wp),
            }
        }
    };
    Ok(EigenPump { profile, pump_frequency: wp, frequencies: w.to_vec() })
}

/// Eigenmodes (or pairs) whose phase mismatch is within tolerance.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PhaseMatched {
    Modes(Vec<usize>),
    /// unordered pairs with `k <= k'`
    Pairs(Vec<(usize, usize)>),
}

impl PhaseMatched {
    pub fn is_empty(&self) -> bool {
        match self {
            Self::Modes(v) => v.is_empty(),
            Self::Pairs(v) => v.is_empty(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Modes(v) => v.len(),
            Self::Pairs(v) => v.len(),
        }
    }
}

pub fn phase_matched_set(pump: &EigenPump, tolerance: f64) -> Result<PhaseMatched> {
    if !(tolerance >= 0.0) {
        return Err(invalid("tolerance must be non-negative"));
    }
    Ok(match &pump.profile {
        EigenProfile::Lasing { mismatch, .. } => PhaseMatched::Modes(
            mismatch.iter().enumerate().filter(|(_, d)| d.abs() <= tolerance).map(|(k, _)| k).collect(),
        ),
        EigenProfile::Squeezing { mismatch, .. } => {
            let n = mismatch.nrows();
            let mut pairs = Vec::new();
            for a in 0..n {
                for b in a..n {
                    if mismatch[(a, b)].abs() <= tolerance {
                        pairs.push((a, b));
                    }
                }
            }
            PhaseMatched::Pairs(pairs)
        }
    })
}
