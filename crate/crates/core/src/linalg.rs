//! Small dense/sparse helpers shared by the solvers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Eigen-decomposition of a real symmetric matrix with ascending
/// eigenvalues. Each eigenvector is oriented so that its largest-magnitude
/// entry (the first one, on ties) is positive.
pub fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::invalid("eigen-decomposition needs a square matrix"));
    }
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry in eigensolve".into()));
    }
    let eig = SymmetricEigen::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).clone_owned();
        orient(v.as_mut_slice());
        vectors.set_column(col, &v);
    }
    Ok((values, vectors))
}

/// Flip the sign of `v` so that its dominant entry is positive.
pub fn orient(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let lead = v.iter().position(|x| x.abs() >= max * (1.0 - 1e-9)).unwrap_or(0);
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        // conj(x) * y
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

pub fn cnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn caxpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn cscale(alpha: f64, x: &mut [C64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// Real sparse matrix in compressed-row form. Column indices are `u32`
/// since state spaces above 2³² are refused long before this point.
#[derive(Debug, Clone, Default)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from per-row entry lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            nrows,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y += alpha * A x
    pub fn apply_add(&self, alpha: f64, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut re = 0.0;
            let mut im = 0.0;
            for k in lo..hi {
                let v = self.vals[k];
                let xc = x[self.cols[k] as usize];
                re += v * xc.re;
                im += v * xc.im;
            }
            yr.re += alpha * re;
            yr.im += alpha * im;
        }
    }

    /// y += alpha * A x for real vectors.
    pub fn apply_add_real(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yr += alpha * acc;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[lo..hi]
            .binary_search(&(c as u32))
            .map(|k| self.vals[lo + k])
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.nrows);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k] as usize)] += self.vals[k];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_and_oriented() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 3.0]);
        let (vals, vecs) = symmetric_eigen_sorted(&m).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-14 && (vals[1] - 4.0).abs() < 1e-14);
        let s = 0.5f64.sqrt();
        assert!((vecs[(0, 0)] - s).abs() < 1e-12 && (vecs[(1, 0)] + s).abs() < 1e-12);
        assert!((vecs[(0, 1)] - s).abs() < 1e-12 && (vecs[(1, 1)] - s).abs() < 1e-12);
    }

    #[test]
    fn csr_sums_duplicates() {
        let a = CsrMatrix::from_rows(vec![vec![(1, 1.0), (1, 2.0)], vec![(0, 3.0)]]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), 3.0);
        let x = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        let mut y = vec![C64::new(0.0, 0.0); 2];
        a.apply_add(2.0, &x, &mut y);
        assert_eq!(y[0], C64::new(0.0, 6.0));
        assert_eq!(y[1], C64::new(6.0, 0.0));
    }
}
