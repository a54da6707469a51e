//! Compressed-row sparse matrices with a deterministic row-parallel product.
//!
//! Each output entry is a sequential dot product over its row, so results are
//! bit-identical for any rayon thread count.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Rows below this count are processed on the calling thread.
const PAR_MIN_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from raw parts; column indices must be strictly increasing per row.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 || row_offsets[0] != 0 {
            return Err(invalid("row offsets must have nrows + 1 entries starting at 0"));
        }
        if *row_offsets.last().unwrap() != col_indices.len() || col_indices.len() != values.len() {
            return Err(invalid("row offsets, column indices and values disagree in length"));
        }
        for i in 0..nrows {
            let (a, b) = (row_offsets[i], row_offsets[i + 1]);
            if a > b {
                return Err(invalid(format!("row offsets decrease at row {i}")));
            }
            let cols = &col_indices[a..b];
            if cols.iter().any(|&c| c >= ncols) || cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!("row {i} has unsorted or out-of-range columns")));
            }
        }
        Ok(Self { nrows, ncols, row_offsets, col_indices, values })
    }

    /// Structure from sorted per-row column lists, all values zero.
    pub(crate) fn with_pattern(n: usize, pattern: &[Vec<usize>]) -> Self {
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        for row in pattern {
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        let values = vec![T::zero(); col_indices.len()];
        Self { nrows: n, ncols: n, row_offsets, col_indices, values }
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for r in rows {
            if r.len() != ncols {
                return Err(invalid("ragged dense matrix"));
            }
            for (j, &v) in r.iter().enumerate() {
                if v != T::zero() {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self { nrows, ncols, row_offsets, col_indices, values })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[a..b], &self.values[a..b])
    }

    /// Storage position of entry `(i, j)`, if structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        self.col_indices[a..b].binary_search(&j).ok().map(|k| a + k)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.position(i, j).map_or(T::zero(), |k| self.values[k])
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[T]) -> T {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        let mut acc = T::zero();
        for k in a..b {
            acc += self.values[k] * x[self.col_indices[k]];
        }
        acc
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols, "matvec input length");
        assert_eq!(y.len(), self.nrows, "matvec output length");
        if self.nrows < PAR_MIN_ROWS {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        } else {
            y.par_iter_mut()
                .with_min_len(PAR_MIN_ROWS / 4)
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Applies `f(i, row_i · x)` to every row, in parallel for large matrices.
    ///
    /// `out_a[i]` and `out_b[i]` are handed to `f` alongside the row product;
    /// neither may alias `x`.
    pub(crate) fn for_each_row_product<F>(&self, x: &[T], out_a: &mut [T], out_b: &mut [T], f: F)
    where
        F: Fn(usize, T, &mut T, &mut T) + Sync + Send,
    {
        debug_assert_eq!(out_a.len(), self.nrows);
        debug_assert_eq!(out_b.len(), self.nrows);
        if self.nrows < PAR_MIN_ROWS {
            for (i, (a, b)) in out_a.iter_mut().zip(out_b.iter_mut()).enumerate() {
                f(i, self.row_dot(i, x), a, b);
            }
        } else {
            out_a
                .par_iter_mut()
                .zip(out_b.par_iter_mut())
                .with_min_len(PAR_MIN_ROWS / 4)
                .enumerate()
                .for_each(|(i, (a, b))| f(i, self.row_dot(i, x), a, b));
        }
    }

    pub fn is_symmetric(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        (0..self.nrows).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| self.get(j, i) == v)
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_roundtrip_and_matvec() {
        let d = vec![vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]];
        let m = CsrMatrix::from_dense(&d).unwrap();
        assert_eq!(m.nnz(), 7);
        assert!(m.is_symmetric());
        assert_eq!(m.to_dense(), d);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![1.0, 0.0, 1.0]);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.position(2, 1), Some(5));
    }

    #[test]
    fn rejects_malformed_parts() {
        assert!(CsrMatrix::<f64>::from_parts(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(CsrMatrix::<f64>::from_parts(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::<f64>::from_parts(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
    }

    #[test]
    fn parallel_matvec_matches_serial_bitwise() {
        let n = 3 * PAR_MIN_ROWS;
        let pattern: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut r = vec![i];
                if i > 0 {
                    r.insert(0, i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect();
        let mut m = CsrMatrix::<f64>::with_pattern(n, &pattern);
        for (k, v) in m.values_mut().iter_mut().enumerate() {
            *v = ((k * 7919) % 113) as f64 / 17.0 - 3.0;
        }
        let x: Vec<f64> = (0..n).map(|i| ((i * 31) % 97) as f64 * 0.013).collect();
        let serial: Vec<f64> = (0..n).map(|i| m.row_dot(i, &x)).collect();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let par = pool.install(|| m.matvec(&x));
        assert_eq!(serial, par);
    }
}
