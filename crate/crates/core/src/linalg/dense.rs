use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense symmetric matrix. Every mutator writes both mirror entries, so the
/// stored matrix is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.0[(i, i)] = v;
        }
        m
    }

    /// Builds from the upper triangle of `f(i, j)`, `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in 0..=j {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Symmetrizes an arbitrary square matrix as `(A + A^T) / 2`.
    pub fn from_dense(a: DMatrix<f64>) -> Self {
        assert!(a.is_square(), "matrix must be square");
        let mut s = SymMatrix(a);
        s.symmetrize();
        s
    }

    pub(crate) fn symmetrize(&mut self) {
        let n = self.n();
        for j in 0..n {
            for i in 0..j {
                let v = 0.5 * (self.0[(i, j)] + self.0[(j, i)]);
                self.0[(i, j)] = v;
                self.0[(j, i)] = v;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    /// Adds `v` to entry `(i, j)` and its mirror (once on the diagonal).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] += v;
        if i != j {
            self.0[(j, i)] += v;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn add_diag(&mut self, d: &[f64], alpha: f64) {
        for (i, &v) in d.iter().enumerate() {
            self.0[(i, i)] += alpha * v;
        }
    }

    /// Frobenius inner product `tr(AB)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm_fro(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn as_dense(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dense(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| self.0.row(i).iter().copied().collect())
            .collect()
    }

    pub fn scale(&mut self, alpha: f64) {
        self.0 *= alpha;
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &SymMatrix) {
        self.0.zip_apply(&other.0, |a, b| *a += alpha * b);
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eig_sym(self)?.eigenvalues.first().copied().unwrap_or(0.0))
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix(&self.0 * rhs)
    }
}

impl AddAssign<&SymMatrix> for SymMatrix {
    fn add_assign(&mut self, rhs: &SymMatrix) {
        self.0 += &rhs.0;
    }
}

/// Eigenvalues in ascending order with column-aligned orthonormal
/// eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomp {
    /// `S Diag(f(lambda)) S^T`, skipping columns where `f` yields zero.
    pub fn reconstruct_with(&self, mut f: impl FnMut(f64) -> f64) -> SymMatrix {
        let n = self.eigenvalues.len();
        let mut out = DMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let c = f(lam);
            if c == 0.0 {
                continue;
            }
            let s = self.eigenvectors.column(k);
            out.ger(c, &s, &s, 1.0);
        }
        SymMatrix::from_dense(out)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }

    /// Columns `sqrt(scale * lambda_k) s_k` for every positive eigenvalue
    /// `lambda_k`, so that `F F^T = scale * M_+`.
    pub fn positive_factor(&self, scale: f64, zero_tol: f64) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..self.eigenvalues.len())
            .filter(|&k| self.eigenvalues[k] > zero_tol)
            .collect();
        let n = self.eigenvectors.nrows();
        let mut f = DMatrix::zeros(n, cols.len());
        for (c, &k) in cols.iter().enumerate() {
            let a = (scale * self.eigenvalues[k]).sqrt();
            f.column_mut(c)
                .copy_from(&(self.eigenvectors.column(k) * a));
        }
        f
    }
}

pub fn eig_sym(m: &SymMatrix) -> Result<SpectralDecomp> {
    if !m.is_finite() {
        return Err(Error::NumericInput);
    }
    let n = m.n();
    let eig = SymmetricEigen::new(m.0.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        eigenvectors
            .column_mut(c)
            .copy_from(&eig.eigenvectors.column(k));
    }
    Ok(SpectralDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues at or below this magnitude are treated as exact zeros.
pub fn spectral_zero_tol(m: &SymMatrix) -> f64 {
    1e-12 * m.norm_fro().max(1.0)
}

/// Splits `m` into its projections onto the PSD and NSD cones.
pub fn psd_split(m: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let d = eig_sym(m)?;
    Ok(split_from(&d, spectral_zero_tol(m)))
}

pub(crate) fn split_from(d: &SpectralDecomp, tol: f64) -> (SymMatrix, SymMatrix) {
    let plus = d.reconstruct_with(|l| if l > tol { l } else { 0.0 });
    let minus = d.reconstruct_with(|l| if l < -tol { l } else { 0.0 });
    (plus, minus)
}
