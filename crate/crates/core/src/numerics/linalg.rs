use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Row-major dense real matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = s;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("shape", "rows and cols must be positive"));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrix::from_row_major",
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut entries = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    context: "DenseMatrix::from_columns",
                    expected: rows,
                    actual: c.len(),
                });
            }
            for (i, &x) in c.iter().enumerate() {
                entries[i * cols + j] = x;
            }
        }
        Self::from_row_major(rows, cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// `out += scale * self * x`.
    pub fn mul_vec_add(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o += scale * dot(self.row(i), x);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_add(x, 1.0, &mut out);
        out
    }

    /// `self * selfᵀ`.
    pub fn gram(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, stopped at the given relative change.
pub fn top_eigenvalue_psd(m: &DenseMatrix, rel_tol: f64, max_iter: usize) -> f64 {
    assert_eq!(m.rows(), m.cols());
    let n = m.rows();
    // A slightly non-uniform start avoids being orthogonal to the top vector
    // for structured inputs.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    let scale = norm(&v);
    v.iter_mut().for_each(|x| *x /= scale);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = m.mul_vec(&v);
        let next = dot(&v, &w);
        let wn = norm(&w);
        if wn == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / wn).collect();
        if (next - lambda).abs() <= rel_tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseMatrix::from_row_major(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::from_row_major(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn gram_and_trace() {
        let a = DenseMatrix::from_row_major(2, 3, vec![1.0, 2.0, 3.0, 0.0, 1.0, -1.0]).unwrap();
        let g = a.gram();
        assert_eq!(g.entries(), &[14.0, -1.0, -1.0, 2.0]);
        assert_eq!(g.trace(), a.frobenius_sq());
    }

    #[test]
    fn from_columns_layout() {
        let m = DenseMatrix::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row(0), &[1.0, 3.0]);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![4.0, 6.0]);
    }

    #[test]
    fn power_iteration_diagonal() {
        let mut m = DenseMatrix::zeros(3, 3);
        m.set(0, 0, 1.0);
        m.set(1, 1, 5.0);
        m.set(2, 2, 2.0);
        let l = top_eigenvalue_psd(&m, 1e-12, 10_000);
        assert!((l - 5.0).abs() < 1e-9, "{l}");
    }

    #[test]
    fn power_iteration_2x2() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let m = DenseMatrix::from_row_major(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((top_eigenvalue_psd(&m, 1e-12, 1000) - 3.0).abs() < 1e-9);
    }
}
