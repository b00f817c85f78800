use rayon::prelude::*;

use super::DenseMat;
use crate::error::{Error, Result};

/// Read-only sparse operator in compressed-row storage.
///
/// Only products *with* the operator are exposed: `A * X` ([`SparseOp::spmm`])
/// and `P * A` ([`SparseOp::premul`]). There is deliberately no entry point
/// that applies `A^T`, so the least-squares solver has to realize every
/// `A^T A` product through regrouped traces of dense factors.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOp {
    /// Validates raw CSR arrays. Column indices must be strictly increasing
    /// within each row.
    pub fn new(rows: usize, cols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Structure(format!("empty operator {rows}x{cols}")));
        }
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 {
            return Err(Error::Structure("row pointer array malformed".into()));
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != values.len() {
            return Err(Error::Structure("row extents disagree with nonzero count".into()));
        }
        for i in 0..rows {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            if lo > hi {
                return Err(Error::Structure(format!("row {i} has negative extent")));
            }
            let idx = &col_idx[lo..hi];
            if idx.iter().any(|&j| j >= cols) {
                return Err(Error::Structure(format!("row {i} has a column index out of range")));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Structure(format!(
                    "row {i}: column indices not strictly increasing"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("SparseOp::new"));
        }
        Ok(SparseOp {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Assembles from zero-based `(row, col, value)` triplets, summing
    /// duplicates. Explicit zeros are kept.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|&&(i, j, _)| i >= rows || j >= cols) {
            return Err(Error::Structure(format!(
                "entry ({i}, {j}) outside a {rows}x{cols} operator"
            )));
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
            last = Some((i, j));
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::new(rows, cols, row_ptr, col_idx, values)
    }

    /// Stores the nonzero entries of a dense matrix.
    pub fn from_dense(m: &DenseMat) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(m.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        Self::new(m.rows(), m.cols(), row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Iterates `(row, col, value)` over stored entries in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (idx, vals) = self.row(i);
            idx.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut out = DenseMat::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            out[(i, j)] += v;
        }
        out
    }

    pub fn fro_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `<A, M>_F` against a dense matrix of the same shape.
    pub fn fro_inner_dense(&self, m: &DenseMat) -> Result<f64> {
        if m.shape() != self.shape() {
            return Err(Error::Dimension {
                op: "fro_inner_dense",
                lhs: self.shape(),
                rhs: m.shape(),
            });
        }
        Ok(self.triplets().map(|(i, j, v)| v * m[(i, j)]).sum())
    }

    /// `trace(S * A)` for a dense `S` with the shape of `A^T`.
    pub fn trace_of_product(&self, s: &DenseMat) -> Result<f64> {
        if s.shape() != (self.cols, self.rows) {
            return Err(Error::Dimension {
                op: "trace_of_product",
                lhs: s.shape(),
                rhs: self.shape(),
            });
        }
        Ok(self.triplets().map(|(i, j, v)| v * s[(j, i)]).sum())
    }

    /// Exact structural and numerical symmetry check.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && self.triplets().all(|(i, j, v)| self.get(j, i) == v)
    }

    /// Stored value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, vals) = self.row(i);
        idx.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    /// Dense product `A * X`.
    pub fn spmm(&self, x: &DenseMat) -> Result<DenseMat> {
        if self.cols != x.rows() {
            return Err(Error::Dimension {
                op: "spmm",
                lhs: self.shape(),
                rhs: x.shape(),
            });
        }
        let p = x.cols();
        let mut out = DenseMat::zeros(self.rows, p);
        out.as_mut_slice()
            .par_chunks_mut(p)
            .enumerate()
            .for_each(|(i, out_row)| {
                let (idx, vals) = self.row(i);
                for (&j, &a) in idx.iter().zip(vals) {
                    for (o, &b) in out_row.iter_mut().zip(x.row(j)) {
                        *o += a * b;
                    }
                }
            });
        Ok(out)
    }

    /// Dense product `P * A`, multiplying the operator from the right.
    pub fn premul(&self, p: &DenseMat) -> Result<DenseMat> {
        if p.cols() != self.rows {
            return Err(Error::Dimension {
                op: "premul",
                lhs: p.shape(),
                rhs: self.shape(),
            });
        }
        let n = self.cols;
        let mut out = DenseMat::zeros(p.rows(), n);
        out.as_mut_slice()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, out_row)| {
                for (r, &pr) in p.row(i).iter().enumerate() {
                    if pr == 0.0 {
                        continue;
                    }
                    let (idx, vals) = self.row(r);
                    for (&j, &a) in idx.iter().zip(vals) {
                        out_row[j] += pr * a;
                    }
                }
            });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseOp {
        SparseOp::from_triplets(3, 2, &[(0, 0, 1.0), (2, 1, -2.0), (1, 0, 0.5), (0, 1, 3.0)]).unwrap()
    }

    #[test]
    fn triplets_are_sorted_and_summed() {
        let a = SparseOp::from_triplets(2, 2, &[(1, 1, 1.0), (0, 0, 2.0), (1, 1, 0.5)]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(1, 1), 1.5);
        assert_eq!(a.get(0, 1), 0.0);
    }

    #[test]
    fn rejects_unsorted_columns() {
        let err = SparseOp::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
        assert!(SparseOp::new(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseOp::new(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
        assert!(SparseOp::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn identity_spmm_is_noop() {
        let i4 = SparseOp::identity(4).unwrap();
        let x = DenseMat::from_fn(4, 3, |i, j| (i as f64) - 0.5 * j as f64);
        assert_eq!(i4.spmm(&x).unwrap(), x);
    }

    #[test]
    fn spmm_with_identity_recovers_dense() {
        let a = sample();
        assert_eq!(a.spmm(&DenseMat::identity(2)).unwrap(), a.to_dense());
        assert_eq!(a.premul(&DenseMat::identity(3)).unwrap(), a.to_dense());
    }

    #[test]
    fn dimension_errors() {
        let a = sample();
        assert!(a.spmm(&DenseMat::zeros(3, 3)).is_err());
        assert!(a.premul(&DenseMat::zeros(2, 2)).is_err());
        assert!(a.fro_inner_dense(&DenseMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn inner_and_trace_products() {
        let a = sample();
        let m = DenseMat::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        let dense = a.to_dense();
        let expect: f64 = (0..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| dense[(i, j)] * m[(i, j)])
            .sum();
        assert_eq!(a.fro_inner_dense(&m).unwrap(), expect);

        let s = m.transpose();
        let direct = s.matmul(&dense).unwrap().trace();
        assert!((a.trace_of_product(&s).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn symmetry_check() {
        let s = SparseOp::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 2.0), (0, 0, 1.0)]).unwrap();
        assert!(s.is_symmetric());
        assert!(!sample().is_symmetric());
    }
}
