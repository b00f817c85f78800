//! Dense and sparse kernels plus the Frobenius-geometry primitives.
//!
//! All scalars are `f64`. The inner product is `<P, Q> = trace(P^T Q)`, and
//! the merit of a square matrix `M` is `1 - cos(M, I)`, the cosine being
//! measured in that inner product.

mod dense;
mod sparse;

pub use dense::DenseMat;
pub use sparse::SparseOp;

use crate::error::{Error, Result};

/// Unit roundoff of IEEE double precision.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// Multiple of the unit roundoff below which quantities count as zero.
pub const DEGENERACY_FACTOR: f64 = 1e3;

/// Scale-aware zero threshold for the Frobenius norm of a `rows x cols`
/// matrix.
pub fn degeneracy_threshold(rows: usize, cols: usize) -> f64 {
    DEGENERACY_FACTOR * UNIT_ROUNDOFF * ((rows * cols) as f64).sqrt()
}

/// `trace(P^T Q)`.
pub fn fro_inner(p: &DenseMat, q: &DenseMat) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::Dimension {
            op: "fro_inner",
            lhs: p.shape(),
            rhs: q.shape(),
        });
    }
    Ok(p.as_slice().iter().zip(q.as_slice()).map(|(a, b)| a * b).sum())
}

pub fn fro_norm(p: &DenseMat) -> f64 {
    p.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `trace(M) / (sqrt(n) * ||M||_F)`, the cosine between `M` and `I_n`.
pub fn cosine_to_identity(m: &DenseMat) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension {
            op: "cosine_to_identity",
            lhs: m.shape(),
            rhs: (m.rows(), m.rows()),
        });
    }
    let n = m.rows();
    let norm = fro_norm(m);
    let threshold = degeneracy_threshold(n, n);
    if norm <= threshold {
        return Err(Error::Degenerate {
            op: "cosine_to_identity",
            norm,
            threshold,
        });
    }
    let c = m.trace() / ((n as f64).sqrt() * norm);
    Ok(c.clamp(-1.0, 1.0))
}

/// `1 - cos(M, I)`, in `[0, 2]`.
pub fn merit(m: &DenseMat) -> Result<f64> {
    cosine_to_identity(m).map(|c| 1.0 - c)
}

/// Merit from precomputed trace and norm; callers have already checked the
/// norm against the degeneracy threshold.
pub(crate) fn merit_from_parts(trace: f64, norm: f64, n: usize) -> f64 {
    let c = (trace / ((n as f64).sqrt() * norm)).clamp(-1.0, 1.0);
    1.0 - c
}
