//! Row-major dense tables and compressed-sparse-row matrices.
//!
//! The row kernels here fix the floating-point summation order (ascending
//! column / inner index, zero entries skipped) so that the same row computed
//! through different code paths is bitwise identical.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Argument(format!(
                "dense table {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Argument(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; a zero-width table still has `rows` empty rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copies the listed rows, in order, into a new table.
    pub fn gather_rows(&self, ids: &[usize]) -> Dense {
        let mut out = Dense::zeros(ids.len(), self.cols);
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.row(id));
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hconcat(&self, other: &Dense) -> Result<Dense> {
        if self.rows != other.rows {
            return Err(Error::Argument(format!(
                "cannot concatenate tables with {} and {} rows",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut out = Dense::zeros(self.rows, cols);
        for i in 0..self.rows {
            let r = out.row_mut(i);
            r[..self.cols].copy_from_slice(self.row(i));
            r[self.cols..].copy_from_slice(other.row(i));
        }
        Ok(out)
    }
}

/// Output rows handed to one GEMM call; fixed so results do not depend on the thread count.
const GEMM_ROW_CHUNK: usize = 64;

/// `op(a) · op(b)`, where `op` transposes when the matching flag is set.
///
/// Each output row is produced by the same packed kernel with the same
/// reduction order over the inner dimension, so a given input row yields a
/// bitwise-identical output row no matter how many rows are multiplied with it.
pub fn matmul(a: &Dense, transpose_a: bool, b: &Dense, transpose_b: bool) -> Dense {
    let (m, k) = if transpose_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if transpose_b { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb, "inner dimensions differ");
    let (rsa, csa) = if transpose_a { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if transpose_b { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    let mut c = Dense::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    c.data
        .par_chunks_mut(GEMM_ROW_CHUNK * n)
        .enumerate()
        .for_each(|(chunk, out)| {
            let row0 = chunk * GEMM_ROW_CHUNK;
            let rows = out.len() / n;
            // SAFETY: the A offset addresses row `row0` of op(a), and `rows`
            // rows from there stay inside `a.data` by construction of m and
            // the strides; B spans all of `b.data`; C is the exclusive
            // `rows × n` row-major chunk `out`.
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    k,
                    n,
                    1.0,
                    a.data.as_ptr().offset(row0 as isize * rsa),
                    rsa,
                    csa,
                    b.data.as_ptr(),
                    rsb,
                    csb,
                    0.0,
                    out.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        });
    c
}

/// `out += Σ_k row[k] · m[k, :]`, ascending `k`, zero coefficients skipped.
pub fn accumulate_row_times(row: &[f64], m: &Dense, out: &mut [f64]) {
    debug_assert_eq!(row.len(), m.rows());
    debug_assert_eq!(out.len(), m.cols());
    for (k, &a) in row.iter().enumerate() {
        if a != 0.0 {
            axpy(a, m.row(k), out);
        }
    }
}

/// `row · m + bias` written into `out`.
pub fn affine_row(row: &[f64], m: &Dense, bias: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    accumulate_row_times(row, m, out);
    for (o, b) in out.iter_mut().zip(bias) {
        *o += b;
    }
}

/// `out[j] = Σ_k m[j, k] · v[k]`, i.e. `m · v`; equivalently `v · mᵀ` for a row vector.
pub fn matrix_times_vec(m: &Dense, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(v.len(), m.cols());
    for (o, r) in out.iter_mut().zip(m.iter_rows()) {
        *o = dot(r, v);
    }
}

#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Real-valued CSR matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub(crate) fn from_parts(
        n_rows: usize,
        n_cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(indptr.len(), n_rows + 1);
        debug_assert_eq!(indices.len(), values.len());
        Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d.set(i, j, v);
            }
        }
        d
    }

    /// Row `i` of `self · rhs`, accumulated in ascending column order.
    pub fn row_times(&self, i: usize, rhs: &Dense, out: &mut [f64]) {
        out.fill(0.0);
        let (cols, vals) = self.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            axpy(v, rhs.row(j), out);
        }
    }

    pub fn matmul_dense(&self, rhs: &Dense) -> Result<Dense> {
        if self.n_cols != rhs.rows() {
            return Err(Error::Argument(format!(
                "sparse {}x{} times dense {}x{}",
                self.n_rows,
                self.n_cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let mut out = Dense::zeros(self.n_rows, rhs.cols());
        for i in 0..self.n_rows {
            self.row_times(i, rhs, out.row_mut(i));
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *o = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }
}
