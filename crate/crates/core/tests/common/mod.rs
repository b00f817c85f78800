//! Oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use mincos_core::linalg::{DenseMat, SparseOp};
use twofloat::TwoFloat;

/// Merit of `XA + alpha DA` evaluated in double-double.
pub struct DdLine {
    n: usize,
    xa: Vec<TwoFloat>,
    da: Vec<TwoFloat>,
    w: TwoFloat,
    d_i: TwoFloat,
}

impl DdLine {
    pub fn new(xa: &DenseMat, da: &DenseMat) -> Self {
        let n = xa.rows();
        let tf = |m: &DenseMat| m.as_slice().iter().map(|&v| TwoFloat::from(v)).collect::<Vec<_>>();
        let tr = |m: &DenseMat| (0..n).fold(TwoFloat::from(0.0), |acc, i| acc + TwoFloat::from(m[(i, i)]));
        DdLine {
            n,
            xa: tf(xa),
            da: tf(da),
            w: tr(xa),
            d_i: tr(da),
        }
    }

    fn numerator(&self, alpha: TwoFloat) -> TwoFloat {
        self.w + alpha * self.d_i
    }

    fn sq_norm(&self, alpha: TwoFloat) -> TwoFloat {
        let mut ss = TwoFloat::from(0.0);
        for (x, d) in self.xa.iter().zip(&self.da) {
            let e = *x + alpha * *d;
            ss += e * e;
        }
        ss
    }

    /// `true` when the cosine at `a` is below the cosine at `b`. Compares
    /// `p|p|/q` by cross-multiplication: twofloat's division is only
    /// accurate to working precision, its products are not.
    fn cos_less(&self, a: TwoFloat, b: TwoFloat) -> bool {
        let (pa, pb) = (self.numerator(a), self.numerator(b));
        pa * pa.abs() * self.sq_norm(b) < pb * pb.abs() * self.sq_norm(a)
    }

    pub fn cosine(&self, alpha: TwoFloat) -> TwoFloat {
        self.numerator(alpha) / (TwoFloat::from(self.n as f64).sqrt() * self.sq_norm(alpha).sqrt())
    }

    pub fn merit(&self, alpha: f64) -> f64 {
        (TwoFloat::from(1.0) - self.cosine(TwoFloat::from(alpha))).hi()
    }

    /// `F(alpha) - F(0)`.
    pub fn phi(&self, alpha: f64) -> f64 {
        (self.cosine(TwoFloat::from(0.0)) - self.cosine(TwoFloat::from(alpha))).hi()
    }

    /// Minimizer of the merit over `alpha > 0` by bracketing and
    /// golden-section search.
    pub fn golden_section(&self) -> f64 {
        let two = TwoFloat::from(2.0);
        let half = TwoFloat::from(0.5);
        let (mut lo, mut mid, mut hi) = (TwoFloat::from(0.0), TwoFloat::from(1e-8), TwoFloat::from(2e-8));
        while !self.cos_less(hi, mid) {
            lo = mid;
            mid = hi;
            hi *= two;
            assert!(hi.hi() < 1e30, "line has no finite minimizer");
        }
        let g = (TwoFloat::from(5.0).sqrt() - 1.0) * half;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        for _ in 0..200 {
            if self.cos_less(d, c) {
                b = d;
                d = c;
                c = b - g * (b - a);
            } else {
                a = c;
                c = d;
                d = a + g * (b - a);
            }
        }
        ((a + b) * half).hi()
    }
}

/// Dense inverse through nalgebra's LU, as a row-major `DenseMat`.
pub fn dense_inverse(m: &DenseMat) -> DenseMat {
    let a = nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let inv = a.try_inverse().expect("invertible");
    DenseMat::from_fn(m.rows(), m.cols(), |i, j| inv[(i, j)])
}

pub fn ata(a: &SparseOp) -> DenseMat {
    let d = a.to_dense();
    d.transpose().matmul(&d).unwrap()
}

pub fn rel_err(x: &DenseMat, y: &DenseMat) -> f64 {
    mincos_core::fro_norm(&x.sub(y).unwrap()) / mincos_core::fro_norm(y)
}

/// Merit of `X A` by direct evaluation in f64.
pub fn merit_of(x: &DenseMat, a: &DenseMat) -> f64 {
    mincos_core::merit(&x.matmul(a).unwrap()).unwrap()
}
