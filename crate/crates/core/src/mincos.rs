//! MinCos for a square symmetric positive definite operator `A`.
//!
//! Minimizes `F(X) = 1 - cos(XA, I)` by a gradient-type iteration:
//!
//! ```text
//! w_k     = <X_k A, I>
//! D_k     = -(1/n) ((w_k / n) X_k A - I)
//! alpha_k = exact minimizer of F along D_k
//! Z       = X_k + alpha_k D_k
//! X_{k+1} = s sqrt(n) Z / ||Z A||_F,   s = sign(trace(Z A))
//! ```
//!
//! Starting from `X_0 = beta I` with `beta = sqrt(n) / ||A||_F` the iterates
//! commute with `A`, stay symmetric, and converge to `A^{-1}`. Each step costs
//! one product `D A`; `X A` is carried over from the previous normalization.

use crate::accel::{resolve_line, AccelHook, LineFactors, LineStep, StepChoice, StepProposal};
use crate::error::{Error, Result};
use crate::linalg::{degeneracy_threshold, fro_inner, fro_norm, merit_from_parts, DenseMat, SparseOp};
use crate::record::{ConvergenceRecord, Flag, RunOutcome, StepKind};
use crate::solver::{self, MatrixIteration, RunOptions};

/// Solver state for one MinCos run.
#[derive(Clone, Debug)]
pub struct MinCos<'a> {
    a: &'a SparseOp,
    n: usize,
    x: DenseMat,
    xa: DenseMat,
    k: usize,
    w: f64,
    alpha: f64,
    merit: f64,
    direction: Option<DenseMat>,
    prev: Option<(DenseMat, DenseMat)>,
    symmetrize: bool,
}

impl<'a> MinCos<'a> {
    /// Starts from `X_0 = (sqrt(n) / ||A||_F) I`, which commutes with `A` and
    /// already lies on the sphere. `A` is assumed SPD; this is not checked.
    pub fn new(a: &'a SparseOp) -> Result<Self> {
        let n = check_square(a)?;
        let norm = a.fro_norm();
        let threshold = degeneracy_threshold(n, n);
        if norm <= threshold {
            return Err(Error::Degenerate {
                op: "mincos init",
                norm,
                threshold,
            });
        }
        let beta = (n as f64).sqrt() / norm;
        Self::with_initial(a, DenseMat::scaled_identity(n, beta))
    }

    /// Starts from an arbitrary `X_0`, used as given (no normalization).
    pub fn with_initial(a: &'a SparseOp, x0: DenseMat) -> Result<Self> {
        let n = check_square(a)?;
        if x0.shape() != (n, n) {
            return Err(Error::Dimension {
                op: "mincos init",
                lhs: x0.shape(),
                rhs: a.shape(),
            });
        }
        let xa = a.premul(&x0)?;
        let norm = fro_norm(&xa);
        let threshold = degeneracy_threshold(n, n);
        if norm <= threshold {
            return Err(Error::Degenerate {
                op: "mincos init",
                norm,
                threshold,
            });
        }
        let w = xa.trace();
        Ok(MinCos {
            a,
            n,
            merit: merit_from_parts(w, norm, n),
            x: x0,
            xa,
            k: 0,
            w,
            alpha: 0.0,
            direction: None,
            prev: None,
            symmetrize: false,
        })
    }

    /// Symmetrize `Z` before normalizing. Off by default: exact arithmetic
    /// keeps the iterates symmetric, but long ill-conditioned runs drift.
    pub fn with_symmetrize(mut self, on: bool) -> Self {
        self.symmetrize = on;
        self
    }

    pub fn operator(&self) -> &SparseOp {
        self.a
    }

    /// Cached `X_k A`.
    pub fn xa(&self) -> &DenseMat {
        &self.xa
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// Steplength used by the last step.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Direction of the last step, if any.
    pub fn last_direction(&self) -> Option<&DenseMat> {
        self.direction.as_ref()
    }

    pub fn previous(&self) -> Option<(&DenseMat, &DenseMat)> {
        self.prev.as_ref().map(|(x, d)| (x, d))
    }

    /// `w = trace(X A)` and `D = -(1/n) ((w/n) X A - I)`.
    pub fn direction(&self) -> (f64, DenseMat) {
        let n = self.n as f64;
        let w = self.xa.trace();
        let mut d = self.xa.scaled(-w / (n * n));
        for i in 0..self.n {
            d[(i, i)] += 1.0 / n;
        }
        (w, d)
    }

    /// Line-search scalars for direction `d` together with `D A`.
    pub fn line_factors(&self, d: &DenseMat) -> Result<(LineFactors, DenseMat)> {
        let da = self.a.premul(d)?;
        let factors = LineFactors {
            n: self.n,
            w: self.xa.trace(),
            d_i: da.trace(),
            xd: fro_inner(&self.xa, &da)?,
            dd: fro_inner(&da, &da)?,
            xx: fro_inner(&self.xa, &self.xa)?,
        };
        Ok((factors, da))
    }

    /// Exact minimizer of `F(X + alpha D)` over `alpha > 0`.
    pub fn optimal_alpha(&self, d: &DenseMat) -> Result<f64> {
        let (factors, _) = self.line_factors(d)?;
        factors.optimal_alpha(self.k)
    }

    /// One step with the optimal steplength, or `alpha_override` when given.
    /// Overridden steps are tagged [`StepKind::Fallback`].
    pub fn step(&mut self, alpha_override: Option<f64>) -> Result<ConvergenceRecord> {
        let (w, d) = self.direction();
        if self.is_stationary(&d) {
            return Ok(self.stationary_step(w, d));
        }
        let (factors, da) = self.line_factors(&d)?;
        let choice = match alpha_override {
            Some(alpha) => StepChoice {
                alpha,
                kind: StepKind::Fallback,
                flag: None,
            },
            None => match resolve_line(&factors, self.k, &self.xa, &da)? {
                LineStep::Finite(alpha) => optimal(alpha),
                LineStep::Infinite => optimal(f64::INFINITY),
                LineStep::Stationary => return Ok(self.stationary_step(w, d)),
            },
        };
        self.advance(w, d, da, choice, true)
    }

    fn is_stationary(&self, d: &DenseMat) -> bool {
        fro_norm(d) <= degeneracy_threshold(self.n, 1)
    }

    fn stationary_step(&mut self, w: f64, d: DenseMat) -> ConvergenceRecord {
        self.w = w;
        self.alpha = 0.0;
        self.k += 1;
        self.direction = Some(d);
        let mut rec = ConvergenceRecord::new(self.k, self.merit, 0.0, StepKind::Optimal);
        rec.flag(Flag::Stationary);
        rec
    }

    fn advance(
        &mut self,
        w: f64,
        d: DenseMat,
        da: DenseMat,
        choice: StepChoice,
        keep_history: bool,
    ) -> Result<ConvergenceRecord> {
        let alpha = choice.alpha;
        if alpha.is_nan() || alpha == f64::NEG_INFINITY {
            return Err(Error::NonFinite("mincos steplength"));
        }
        let (mut z, za) = if alpha.is_infinite() {
            (d.clone(), da)
        } else {
            (
                DenseMat::axpy(alpha, &d, &self.x)?,
                DenseMat::axpy(alpha, &da, &self.xa)?,
            )
        };
        let za = if self.symmetrize {
            z = z.sym_part()?;
            self.a.premul(&z)?
        } else {
            za
        };

        let (x, xa, flipped) = normalize(z, za, self.n, self.k)?;
        let old_x = std::mem::replace(&mut self.x, x);
        self.xa = xa;
        self.prev = if keep_history { Some((old_x, d.clone())) } else { None };
        self.direction = Some(d);
        self.w = w;
        self.alpha = alpha;
        self.k += 1;
        self.merit = merit_from_parts(self.xa.trace(), fro_norm(&self.xa), self.n);

        let mut rec = ConvergenceRecord::new(self.k, self.merit, alpha, choice.kind);
        if let Some(f) = choice.flag {
            rec.flag(f);
        }
        if flipped {
            rec.flag(Flag::SignFlip);
        }
        Ok(rec)
    }
}

fn optimal(alpha: f64) -> StepChoice {
    StepChoice {
        alpha,
        kind: StepKind::Optimal,
        flag: None,
    }
}

/// Projects `Z` onto the sphere `||Z A||_F = sqrt(n)` with positive trace.
/// Returns the scaled `Z`, scaled `Z A`, and whether the sign was flipped.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these tests
fn normalize(mut z: DenseMat, mut za: DenseMat, n: usize, k: usize) -> Result<(DenseMat, DenseMat, bool)> {
    let norm = fro_norm(&za);
    let threshold = degeneracy_threshold(n, n);
    if !(norm > threshold) {
        return Err(Error::DegenerateIterate { k, norm, threshold });
    }
    let flipped = !(za.trace() > 0.0);
    let s = if flipped { -1.0 } else { 1.0 };
    let c = s * (n as f64).sqrt() / norm;
    z.scale_in_place(c);
    za.scale_in_place(c);
    if !z.is_finite() {
        return Err(Error::NonFinite("mincos normalization"));
    }
    Ok((z, za, flipped))
}

fn check_square(a: &SparseOp) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::Dimension {
            op: "mincos",
            lhs: a.shape(),
            rhs: (a.rows(), a.rows()),
        });
    }
    Ok(a.rows())
}

impl MatrixIteration for MinCos<'_> {
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

    fn residual(&self) -> f64 {
        let mut r = self.xa.clone();
        for i in 0..self.n {
            r[(i, i)] -= 1.0;
        }
        fro_norm(&r) / (self.n as f64).sqrt()
    }

    fn sphere_norm(&self) -> f64 {
        fro_norm(&self.xa)
    }

    fn step_with(&mut self, hook: &mut AccelHook) -> Result<ConvergenceRecord> {
        let (w, d) = self.direction();
        if self.is_stationary(&d) {
            return Ok(self.stationary_step(w, d));
        }
        let (factors, da) = self.line_factors(&d)?;
        let alpha_opt = match resolve_line(&factors, self.k, &self.xa, &da)? {
            LineStep::Finite(alpha) => alpha,
            LineStep::Infinite => return self.advance(w, d, da, optimal(f64::INFINITY), hook.needs_history()),
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
        self.advance(w, d, da, choice, keep)
    }

    fn restart_from(&mut self, x: DenseMat) -> Result<bool> {
        if x.shape() != (self.n, self.n) {
            return Err(Error::Dimension {
                op: "mincos restart",
                lhs: x.shape(),
                rhs: (self.n, self.n),
            });
        }
        let z = if self.symmetrize { x.sym_part()? } else { x };
        let za = self.a.premul(&z)?;
        let (x, xa, flipped) = normalize(z, za, self.n, self.k)?;
        self.x = x;
        self.xa = xa;
        self.prev = None;
        self.merit = merit_from_parts(self.xa.trace(), fro_norm(&self.xa), self.n);
        Ok(flipped)
    }

    fn functional(&self, s: &DenseMat) -> Result<f64> {
        self.a.trace_of_product(s)
    }
}

/// Runs MinCos from the default initial guess.
pub fn run(a: &SparseOp, opts: &RunOptions, hook: &mut AccelHook) -> Result<RunOutcome> {
    let mut solver = MinCos::new(a)?;
    solver::run(&mut solver, opts, hook)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    fn dense_merit(x: &DenseMat, a: &DenseMat) -> f64 {
        crate::linalg::merit(&x.matmul(a).unwrap()).unwrap()
    }

    #[test]
    fn init_examples() {
        let i4 = SparseOp::identity(4).unwrap();
        let s = MinCos::new(&i4).unwrap();
        assert!(s.iterate().max_abs_diff(&DenseMat::identity(4)) < 1e-15);
        assert!(s.merit().abs() < 1e-15);

        let a = SparseOp::from_dense(&DenseMat::diag(&[1.0, 2.0])).unwrap();
        let s = MinCos::new(&a).unwrap();
        let beta = 2f64.sqrt() / 5f64.sqrt();
        assert!(s.iterate().max_abs_diff(&DenseMat::scaled_identity(2, beta)) < 1e-15);

        let a = SparseOp::from_dense(&DenseMat::scaled_identity(3, 2.0)).unwrap();
        let s = MinCos::new(&a).unwrap();
        assert!(s.iterate().max_abs_diff(&DenseMat::scaled_identity(3, 0.5)) < 1e-15);
        assert!(s.merit().abs() < 1e-15);
    }

    #[test]
    fn init_errors() {
        let rect = SparseOp::from_triplets(3, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(matches!(MinCos::new(&rect), Err(Error::Dimension { .. })));
        let zero = SparseOp::from_triplets(2, 2, &[(0, 0, 0.0)]).unwrap();
        assert!(matches!(MinCos::new(&zero), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn direction_examples() {
        let a = SparseOp::from_dense(&DenseMat::diag(&[1.0, 2.0])).unwrap();
        let s = MinCos::with_initial(&a, DenseMat::identity(2)).unwrap();
        let (w, d) = s.direction();
        assert_eq!(w, 3.0);
        assert!(d.max_abs_diff(&DenseMat::diag(&[-0.25, -1.0])) < 1e-15);

        let i3 = SparseOp::identity(3).unwrap();
        let s = MinCos::new(&i3).unwrap();
        let (w, d) = s.direction();
        assert!((w - 3.0).abs() < 1e-15);
        assert!(fro_norm(&d) < 1e-15);
    }

    #[test]
    fn direction_is_descent() {
        // Central differences of t -> F(X + t D) at t = 0.
        for seed in 0..5 {
            let a = gallery::random_spd(8, seed);
            let ad = a.to_dense();
            let s = MinCos::new(&a).unwrap();
            let (_, d) = s.direction();
            let h = 1e-6;
            let fp = dense_merit(&DenseMat::axpy(h, &d, s.iterate()).unwrap(), &ad);
            let fm = dense_merit(&DenseMat::axpy(-h, &d, s.iterate()).unwrap(), &ad);
            assert!((fp - fm) / (2.0 * h) < 0.0);
        }
    }

    #[test]
    fn optimal_alpha_beats_grid_and_zeroes_derivative() {
        for seed in 10..15 {
            let a = gallery::random_spd(8, seed);
            let ad = a.to_dense();
            let mut s = MinCos::new(&a).unwrap();
            // Move off the initial iterate so X no longer commutes trivially.
            s.step(None).unwrap();
            let (_, d) = s.direction();
            let alpha = s.optimal_alpha(&d).unwrap();
            let phi = |t: f64| dense_merit(&DenseMat::axpy(t * alpha, &d, s.iterate()).unwrap(), &ad);
            let at_one = phi(1.0);
            for t in [0.5, 0.9, 1.1, 1.5] {
                assert!(at_one <= phi(t) + 1e-15, "t = {t}");
            }
            let h = 1e-4;
            let deriv = (phi(1.0 + h) - phi(1.0 - h)) / (2.0 * h);
            let slope0 = (phi(h) - phi(-h)) / (2.0 * h);
            assert!(deriv.abs() <= 1e-6 * slope0.abs(), "{deriv} vs {slope0}");
        }
    }

    #[test]
    fn step_normalizes_onto_sphere() {
        let a = SparseOp::from_dense(&DenseMat::diag(&[1.0, 2.0])).unwrap();
        let mut s = MinCos::new(&a).unwrap();
        let rec = s.step(None).unwrap();
        assert_eq!(rec.k, 1);
        let xa = s.iterate().matmul(&a.to_dense()).unwrap();
        assert!((fro_norm(&xa) - 2f64.sqrt()).abs() < 1e-14);
        assert!(xa.trace() > 0.0);
    }

    #[test]
    fn solution_is_a_fixed_point() {
        let a = SparseOp::from_dense(&DenseMat::diag(&[2.0, 2.0])).unwrap();
        let mut s = MinCos::with_initial(&a, DenseMat::scaled_identity(2, 0.5)).unwrap();
        let before = s.iterate().clone();
        let rec = s.step(None).unwrap();
        assert!(rec.has(Flag::Stationary));
        assert!(rec.merit.abs() < 1e-15);
        assert_eq!(s.iterate(), &before);
    }

    #[test]
    fn poisson_merit_decreases() {
        let a = gallery::poisson2d(4);
        let ad = a.to_dense();
        let mut s = MinCos::new(&a).unwrap();
        let mut last = dense_merit(s.iterate(), &ad);
        for _ in 0..2 {
            s.step(None).unwrap();
            let f = dense_merit(s.iterate(), &ad);
            assert!(f < last);
            assert!((f - s.merit()).abs() < 1e-13);
            last = f;
        }
    }

    #[test]
    fn identity_converges_immediately() {
        let i5 = SparseOp::identity(5).unwrap();
        let out = run(&i5, &RunOptions::new(1e-12, 10), &mut AccelHook::none()).unwrap();
        assert!(out.converged());
        assert_eq!(out.iterations, 0);
        assert!(out.history.is_empty());
        assert!(out.x.max_abs_diff(&DenseMat::identity(5)) < 1e-15);
    }

    #[test]
    fn maxiter_is_flagged_not_an_error() {
        let a = gallery::poisson2d(5);
        let out = run(&a, &RunOptions::new(1e-14, 3), &mut AccelHook::none()).unwrap();
        assert_eq!(out.history.len(), 3);
        assert!(out.history.last().unwrap().has(Flag::MaxIter));
        assert!(!out.converged());
    }

    #[test]
    fn bad_options_are_rejected() {
        let a = gallery::poisson2d(2);
        assert!(run(&a, &RunOptions::new(0.0, 3), &mut AccelHook::none()).is_err());
        assert!(run(&a, &RunOptions::new(1e-3, 0), &mut AccelHook::none()).is_err());
    }

    #[test]
    fn override_is_used() {
        let a = gallery::poisson2d(3);
        let mut s = MinCos::new(&a).unwrap();
        let rec = s.step(Some(0.01)).unwrap();
        assert_eq!(rec.alpha, 0.01);
        assert_eq!(rec.step_kind, StepKind::Fallback);
        assert!(s.previous().is_some());
    }

    #[test]
    fn symmetrized_run_stays_symmetric() {
        let a = gallery::lehmer_op(12);
        let mut s = MinCos::new(&a).unwrap().with_symmetrize(true);
        for _ in 0..30 {
            s.step(None).unwrap();
            assert_eq!(s.iterate().asymmetry(), 0.0);
        }
    }
}
