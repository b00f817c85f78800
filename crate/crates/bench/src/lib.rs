//! Fixtures shared by the kernel and solver benchmarks.

use mincos_core::gallery::{poisson2d, randn_mat, randn_op, wathen};
use mincos_core::linalg::{DenseMat, SparseOp};

/// Named operators at a few sizes.
pub fn operators() -> Vec<(String, SparseOp)> {
    vec![
        ("poisson2d(10)".into(), poisson2d(10)),
        ("poisson2d(20)".into(), poisson2d(20)),
        ("wathen(5)".into(), wathen(5, 1)),
        ("randn(120x80)".into(), randn_op(120, 80, 1)),
    ]
}

/// A dense right-hand factor matching the operator's column count.
pub fn dense_for(a: &SparseOp, seed: u64) -> DenseMat {
    randn_mat(a.cols(), a.cols(), seed)
}

/// A dense left-hand factor matching the operator's row count.
pub fn dense_left(a: &SparseOp, seed: u64) -> DenseMat {
    randn_mat(a.rows(), a.rows(), seed)
}
