//! MinCos for the normal-equation matrix `A^T A` of a rectangular,
//! full-column-rank `A` (`m >= n`), using products with `A` only.
//!
//! Every quantity of the square iteration applied to `A^T A` is regrouped
//! with `<Y A^T A, I> = <A Y^T, A>` and `||Y A^T A||_F = ||(A Y^T)^T A||_F`
//! into traces of dense `m x n` and `n x n` factors:
//!
//! ```text
//! C_k   = A X_k,                  w_k  = <C_k, A>
//! D_k   = -(1/n) ((w_k/n) C_k^T A - I)
//! B_k   = A D_k,                  beta = <B_k, A>,  mu = <B_k^T A, C_k^T A>
//! alpha = |(n beta - w mu) / (beta mu - w ||B_k^T A||^2)|
//! Z     = sym(X_k + alpha D_k)
//! X_{k+1} = s sqrt(n) Z / ||(A Z)^T A||_F
//! ```
//!
//! `C^T A` and `B^T A` are formed by multiplying the dense transposes by the
//! sparse operator from the right, so `A^T` is never applied.

use crate::accel::{resolve_line, AccelHook, LineFactors, LineStep, StepChoice, StepProposal};
use crate::error::{Error, Result};
use crate::linalg::{degeneracy_threshold, fro_inner, fro_norm, merit_from_parts, DenseMat, SparseOp};
use crate::record::{ConvergenceRecord, Flag, RunOutcome, StepKind};
use crate::solver::{self, MatrixIteration, RunOptions};

/// Solver state for one least-squares MinCos run.
#[derive(Clone, Debug)]
pub struct MinCosLs<'a> {
    a: &'a SparseOp,
    n: usize,
    x: DenseMat,
    /// `C = A X`, `m x n`.
    c: DenseMat,
    /// `C^T A = X A^T A`, `n x n`.
    cta: DenseMat,
    /// `B = A D` of the last step.
    b: Option<DenseMat>,
    k: usize,
    w: f64,
    beta: f64,
    mu: f64,
    alpha: f64,
    merit: f64,
    direction_asymmetry: f64,
    prev: Option<(DenseMat, DenseMat)>,
}

impl<'a> MinCosLs<'a> {
    /// Starts from `X_0 = (sqrt(n) / ||A||_F^2) I`. Full column rank is
    /// assumed, not verified.
    pub fn new(a: &'a SparseOp) -> Result<Self> {
        let n = check_shape(a)?;
        let norm = a.fro_norm();
        let threshold = degeneracy_threshold(a.rows(), n);
        if norm <= threshold {
            return Err(Error::Degenerate {
                op: "mincos-ls init",
                norm,
                threshold,
            });
        }
        let beta = (n as f64).sqrt() / (norm * norm);
        Self::with_initial(a, DenseMat::scaled_identity(n, beta))
    }

    /// Starts from a given symmetric `X_0`, used as given.
    pub fn with_initial(a: &'a SparseOp, x0: DenseMat) -> Result<Self> {
        let n = check_shape(a)?;
        if x0.shape() != (n, n) {
            return Err(Error::Dimension {
                op: "mincos-ls init",
                lhs: x0.shape(),
                rhs: (n, n),
            });
        }
        let c = a.spmm(&x0)?;
        let cta = a.premul(&c.transpose())?;
        let norm = fro_norm(&cta);
        let threshold = degeneracy_threshold(n, n);
        if norm <= threshold {
            return Err(Error::Degenerate {
                op: "mincos-ls init",
                norm,
                threshold,
            });
        }
        let w = a.fro_inner_dense(&c)?;
        Ok(MinCosLs {
            a,
            n,
            merit: merit_from_parts(cta.trace(), norm, n),
            x: x0,
            c,
            cta,
            b: None,
            k: 0,
            w,
            beta: 0.0,
            mu: 0.0,
            alpha: 0.0,
            direction_asymmetry: 0.0,
            prev: None,
        })
    }

    pub fn operator(&self) -> &SparseOp {
        self.a
    }

    /// Cached `C = A X`.
    pub fn c(&self) -> &DenseMat {
        &self.c
    }

    /// Cached `(A X)^T A`.
    pub fn cta(&self) -> &DenseMat {
        &self.cta
    }

    /// `B = A D` from the last step.
    pub fn b(&self) -> Option<&DenseMat> {
        self.b.as_ref()
    }

    /// `(w, beta, mu)` of the last step.
    pub fn scalars(&self) -> (f64, f64, f64) {
        (self.w, self.beta, self.mu)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `||D - D^T||_F` of the last direction. Zero in exact arithmetic; the
    /// direction itself is not symmetrized.
    pub fn direction_asymmetry(&self) -> f64 {
        self.direction_asymmetry
    }

    /// `w = <C, A>` and `D = -(1/n) ((w/n) C^T A - I)`.
    pub fn direction(&self) -> Result<(f64, DenseMat)> {
        let n = self.n as f64;
        let w = self.a.fro_inner_dense(&self.c)?;
        let mut d = self.cta.scaled(-w / (n * n));
        for i in 0..self.n {
            d[(i, i)] += 1.0 / n;
        }
        Ok((w, d))
    }

    /// Line-search scalars for `d`, with `B = A D` and `B^T A`.
    fn line_factors(&self, w: f64, d: &DenseMat) -> Result<(LineFactors, DenseMat, DenseMat)> {
        let b = self.a.spmm(d)?;
        let bta = self.a.premul(&b.transpose())?;
        let factors = LineFactors {
            n: self.n,
            w,
            d_i: self.a.fro_inner_dense(&b)?,
            xd: fro_inner(&bta, &self.cta)?,
            dd: fro_inner(&bta, &bta)?,
            xx: fro_inner(&self.cta, &self.cta)?,
        };
        Ok((factors, b, bta))
    }

    /// One step with the optimal steplength, or `alpha_override` when given.
    pub fn step(&mut self, alpha_override: Option<f64>) -> Result<ConvergenceRecord> {
        let (w, d) = self.direction()?;
        if is_stationary(&d, self.n) {
            return Ok(self.stationary_step(w, d));
        }
        let (factors, b, bta) = self.line_factors(w, &d)?;
        let choice = match alpha_override {
            Some(alpha) => StepChoice {
                alpha,
                kind: StepKind::Fallback,
                flag: None,
            },
            None => match resolve_line(&factors, self.k, &self.cta, &bta)? {
                LineStep::Finite(alpha) => optimal(alpha),
                LineStep::Infinite => optimal(f64::INFINITY),
                LineStep::Stationary => return Ok(self.stationary_step(w, d)),
            },
        };
        self.advance(factors, d, b, choice, true)
    }

    fn stationary_step(&mut self, w: f64, d: DenseMat) -> ConvergenceRecord {
        self.w = w;
        self.alpha = 0.0;
        self.k += 1;
        self.direction_asymmetry = d.asymmetry();
        let mut rec = ConvergenceRecord::new(self.k, self.merit, 0.0, StepKind::Optimal);
        rec.flag(Flag::Stationary);
        rec
    }

    fn advance(
        &mut self,
        factors: LineFactors,
        d: DenseMat,
        b: DenseMat,
        choice: StepChoice,
        keep_history: bool,
    ) -> Result<ConvergenceRecord> {
        let alpha = choice.alpha;
        if alpha.is_nan() || alpha == f64::NEG_INFINITY {
            return Err(Error::NonFinite("mincos-ls steplength"));
        }
        let z = if alpha.is_infinite() {
            d.sym_part()?
        } else {
            DenseMat::axpy(alpha, &d, &self.x)?.sym_part()?
        };
        let (x, c, cta, flipped) = self.normalize(z)?;

        let old_x = std::mem::replace(&mut self.x, x);
        self.c = c;
        self.cta = cta;
        self.direction_asymmetry = d.asymmetry();
        self.prev = if keep_history { Some((old_x, d)) } else { None };
        self.b = Some(b);
        self.w = factors.w;
        self.beta = factors.d_i;
        self.mu = factors.xd;
        self.alpha = alpha;
        self.k += 1;
        self.merit = merit_from_parts(self.cta.trace(), fro_norm(&self.cta), self.n);

        let mut rec = ConvergenceRecord::new(self.k, self.merit, alpha, choice.kind);
        if let Some(f) = choice.flag {
            rec.flag(f);
        }
        if flipped {
            rec.flag(Flag::SignFlip);
        }
        Ok(rec)
    }

    /// Scales symmetric `Z` so that `||(A Z)^T A||_F = sqrt(n)` with positive
    /// trace. Returns the new `X`, `C = A X`, `C^T A` and the sign flag.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn normalize(&self, z: DenseMat) -> Result<(DenseMat, DenseMat, DenseMat, bool)> {
        let mut az = self.a.spmm(&z)?;
        let mut azta = self.a.premul(&az.transpose())?;
        let norm = fro_norm(&azta);
        let threshold = degeneracy_threshold(self.n, self.n);
        if !(norm > threshold) {
            return Err(Error::DegenerateIterate {
                k: self.k,
                norm,
                threshold,
            });
        }
        let flipped = !(azta.trace() > 0.0);
        let s = if flipped { -1.0 } else { 1.0 };
        let scale = s * (self.n as f64).sqrt() / norm;
        let mut x = z;
        x.scale_in_place(scale);
        az.scale_in_place(scale);
        azta.scale_in_place(scale);
        if !x.is_finite() {
            return Err(Error::NonFinite("mincos-ls normalization"));
        }
        Ok((x, az, azta, flipped))
    }
}

fn optimal(alpha: f64) -> StepChoice {
    StepChoice {
        alpha,
        kind: StepKind::Optimal,
        flag: None,
    }
}

fn is_stationary(d: &DenseMat, n: usize) -> bool {
    fro_norm(d) <= degeneracy_threshold(n, 1)
}

fn check_shape(a: &SparseOp) -> Result<usize> {
    if a.rows() < a.cols() {
        return Err(Error::Shape(format!(
            "least-squares operator needs m >= n, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(a.cols())
}

impl MatrixIteration for MinCosLs<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn iterate(&self) -> &DenseMat {
        &self.x
    }

    fn iteration(&self) -> usize {
        self.k
    }

    fn merit(&self) -> f64 {
        self.merit
    }

    /// `||X A^T A - I||_F / sqrt(n)`, with `X A^T A = (A X)^T A` for
    /// symmetric `X`.
    fn residual(&self) -> f64 {
        let mut r = self.cta.clone();
        for i in 0..self.n {
            r[(i, i)] -= 1.0;
        }
        fro_norm(&r) / (self.n as f64).sqrt()
    }

    fn sphere_norm(&self) -> f64 {
        fro_norm(&self.cta)
    }

    fn step_with(&mut self, hook: &mut AccelHook) -> Result<ConvergenceRecord> {
        let (w, d) = self.direction()?;
        if is_stationary(&d, self.n) {
            return Ok(self.stationary_step(w, d));
        }
        let (factors, b, bta) = self.line_factors(w, &d)?;
        let alpha_opt = match resolve_line(&factors, self.k, &self.cta, &bta)? {
            LineStep::Finite(alpha) => alpha,
            LineStep::Infinite => return self.advance(factors, d, b, optimal(f64::INFINITY), hook.needs_history()),
            LineStep::Stationary => return Ok(self.stationary_step(w, d)),
        };
        let choice = {
            let proposal = StepProposal {
                k: self.k,
                alpha_opt,
                factors,
                x: &self.x,
                d: &d,
                prev: self.prev.as_ref().map(|(x, d)| (x, d)),
            };
            hook.choose(&proposal)
        };
        let keep = hook.needs_history();
        self.advance(factors, d, b, choice, keep)
    }

    fn restart_from(&mut self, x: DenseMat) -> Result<bool> {
        if x.shape() != (self.n, self.n) {
            return Err(Error::Dimension {
                op: "mincos-ls restart",
                lhs: x.shape(),
                rhs: (self.n, self.n),
            });
        }
        let (x, c, cta, flipped) = self.normalize(x.sym_part()?)?;
        self.x = x;
        self.c = c;
        self.cta = cta;
        self.prev = None;
        self.merit = merit_from_parts(self.cta.trace(), fro_norm(&self.cta), self.n);
        Ok(flipped)
    }

    /// `trace(S A^T A) = <A S^T, A>`.
    fn functional(&self, s: &DenseMat) -> Result<f64> {
        let ast = self.a.spmm(&s.transpose())?;
        self.a.fro_inner_dense(&ast)
    }
}

/// Runs least-squares MinCos from the default initial guess.
pub fn run(a: &SparseOp, opts: &RunOptions, hook: &mut AccelHook) -> Result<RunOutcome> {
    let mut solver = MinCosLs::new(a)?;
    solver::run(&mut solver, opts, hook)
}
