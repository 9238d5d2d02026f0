//! Small linear-algebra layer: complex aliases, a square CSR matrix for
//! couplings and pump profiles, and a few dense helpers.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;

/// Dense vectors and matrices as `{rows, cols, data}` with column-major data;
/// nalgebra only serialises dynamic storage with std.
#[cfg(feature = "serde")]
pub(crate) mod serde_dense {
    use alloc::vec::Vec;
    use nalgebra::{DMatrix, DVector, Scalar};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Dense<T> {
        rows: usize,
        cols: usize,
        data: Vec<T>,
    }

    pub mod matrix {
        use super::*;

        pub fn serialize<T: Scalar + Serialize, S: Serializer>(m: &DMatrix<T>, s: S) -> Result<S::Ok, S::Error> {
            Dense { rows: m.nrows(), cols: m.ncols(), data: m.as_slice().to_vec() }.serialize(s)
        }

        pub fn deserialize<'de, T: Scalar + Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<DMatrix<T>, D::Error> {
            let x = Dense::<T>::deserialize(d)?;
            if x.rows * x.cols != x.data.len() {
                return Err(D::Error::custom("matrix data length does not match its shape"));
            }
            Ok(DMatrix::from_vec(x.rows, x.cols, x.data))
        }
    }

    pub mod vector {
        use super::*;

        pub fn serialize<T: Scalar + Serialize, S: Serializer>(v: &DVector<T>, s: S) -> Result<S::Ok, S::Error> {
            v.as_slice().serialize(s)
        }

        pub fn deserialize<'de, T: Scalar + Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<DVector<T>, D::Error> {
            Ok(DVector::from_vec(Vec::<T>::deserialize(d)?))
        }
    }
}

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Square sparse matrix in compressed-row form. Column indices within a row
/// are strictly increasing and exact zeros are never stored, so two matrices
/// with the same entries compare equal.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets. Repeated positions are summed.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut t: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        t.sort_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < dim && c < dim, "triplet ({r},{c}) out of range for dimension {dim}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != ZERO);

        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let cols = merged.iter().map(|e| e.1).collect();
        let vals = merged.iter().map(|e| e.2).collect();
        Self { dim, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        assert!(m.is_square());
        let n = m.nrows();
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != ZERO {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_triplets(dim, [])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Upper bound on the spectral radius (largest absolute row sum).
    pub fn gershgorin_radius(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest |A_rc - conj(A_cr)| with its location, `None` when the matrix is empty.
    pub fn hermitian_deviation(&self) -> Option<(f64, usize, usize)> {
        self.deviation_by(|v| v.conj())
    }

    /// Largest |A_rc - A_cr|.
    pub fn symmetric_deviation(&self) -> Option<(f64, usize, usize)> {
        self.deviation_by(|v| v)
    }

    fn deviation_by(&self, f: impl Fn(C64) -> C64) -> Option<(f64, usize, usize)> {
        let mut worst: Option<(f64, usize, usize)> = None;
        for (r, c, v) in self.iter() {
            let d = (v - f(self.get(c, r))).norm();
            if worst.is_none_or(|w| d > w.0) {
                worst = Some((d, r, c));
            }
        }
        worst
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = ZERO;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            *out = acc;
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (r, c, v * s)))
    }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn max_abs_diff_vec(a: &CVector, b: &CVector) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.norm()))
}

/// Eigen-decomposition of a 2x2 Hermitian matrix: the largest eigenvalue and a
/// unit eigenvector for it.
pub(crate) fn hermitian2_top(a: f64, b: C64, d: f64) -> (f64, [C64; 2]) {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let rad = (half * half + b.norm_sqr()).sqrt();
    let top = mean + rad;
    if b.norm() <= f64::EPSILON * (a.abs() + d.abs()).max(f64::MIN_POSITIVE) {
        return if a >= d {
            (top, [C64::new(1.0, 0.0), ZERO])
        } else {
            (top, [ZERO, C64::new(1.0, 0.0)])
        };
    }
    // (a - top) x + b y = 0  ->  (b, top - a)
    let v0 = b;
    let v1 = C64::new(top - a, 0.0);
    let norm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    (top, [v0 / norm, v1 / norm])
}

/// Ordinary least-squares line with coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LinearFit { slope, intercept, r_squared, samples: n })
}
