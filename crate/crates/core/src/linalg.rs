//! Small dense linear algebra for per-window statistics: square matrices,
//! covariance accumulation, ridge loading and Cholesky solves.

use crate::error::{Error, Result};

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{n}x{n} matrix needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self[(i, i)] += value;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// Adds `x x^T` to the matrix.
    pub fn add_outer(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let xi = x[i];
            let row = &mut self.data[i * self.n..(i + 1) * self.n];
            for (r, &xj) in row.iter_mut().zip(x) {
                *r += xi * xj;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Per-component mean of equally long vectors, accumulated as deviations
/// from the first sample so that identical samples yield their exact value.
pub fn mean_vector<'a>(samples: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut iter = samples.into_iter();
    let Some(anchor) = iter.next() else {
        return vec![0.0; dim];
    };
    let mut acc = vec![0.0; dim];
    let mut count = 1usize;
    for s in iter {
        for ((a, v), x0) in acc.iter_mut().zip(s).zip(anchor) {
            *a += v - x0;
        }
        count += 1;
    }
    let inv = 1.0 / count as f64;
    anchor
        .iter()
        .zip(&acc)
        .map(|(x0, a)| x0 + a * inv)
        .collect()
}

/// Maximum-likelihood covariance `(1/n) sum (x - mean)(x - mean)^T`.
pub fn centered_covariance<'a, I>(samples: I, dim: usize) -> Matrix
where
    I: IntoIterator<Item = &'a [f64]> + Clone,
{
    let mean = mean_vector(samples.clone(), dim);
    let mut cov = Matrix::zeros(dim);
    let mut diff = vec![0.0; dim];
    let mut count = 0usize;
    for s in samples {
        for ((d, v), m) in diff.iter_mut().zip(s).zip(&mean) {
            *d = v - m;
        }
        cov.add_outer(&diff);
        count += 1;
    }
    if count > 0 {
        cov.scale(1.0 / count as f64);
    }
    cov
}

/// Uncentered second moment `(1/n) sum x x^T`.
pub fn second_moment<'a>(samples: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Matrix {
    let mut acc = Matrix::zeros(dim);
    let mut count = 0usize;
    for s in samples {
        acc.add_outer(s);
        count += 1;
    }
    if count > 0 {
        acc.scale(1.0 / count as f64);
    }
    acc
}

/// Diagonal loading relative to the average eigenvalue: `ridge * trace / dim`,
/// or `ridge` itself when the trace is zero.
pub fn relative_ridge(sigma: &Matrix, ridge: f64) -> f64 {
    let avg = sigma.trace() / sigma.dim() as f64;
    if avg > 0.0 {
        ridge * avg
    } else {
        ridge
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.dim();
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    /// Solves `L z = v` by forward substitution.
    pub fn forward(&self, v: &[f64]) -> Vec<f64> {
        let n = self.l.dim();
        let mut z = vec![0.0; n];
        for i in 0..n {
            let s = v[i] - (0..i).map(|k| self.l[(i, k)] * z[k]).sum::<f64>();
            z[i] = s / self.l[(i, i)];
        }
        z
    }

    /// Solves `A x = v`.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let n = self.l.dim();
        let mut x = self.forward(v);
        for i in (0..n).rev() {
            let s = x[i] - (i + 1..n).map(|k| self.l[(k, i)] * x[k]).sum::<f64>();
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `v^T A^-1 v` as the squared norm of `L^-1 v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.forward(v).iter().map(|z| z * z).sum()
    }
}

/// Factors `sigma` and, if it is not positive definite, retries once with
/// extra diagonal loading of `max(10 * prior_ridge, 1e-8 * trace / dim)`.
pub(crate) fn factor_with_retry(sigma: &Matrix, prior_ridge: f64) -> Result<Cholesky> {
    match Cholesky::factor(sigma) {
        Ok(c) => Ok(c),
        Err(_) => {
            let avg = (sigma.trace() / sigma.dim() as f64).abs();
            let extra = (10.0 * prior_ridge).max(1e-8 * avg);
            if extra.is_nan() || extra <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            let mut loaded = sigma.clone();
            loaded.add_diagonal(extra);
            Cholesky::factor(&loaded)
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
