//! Iteration contract shared by the square and least-squares solvers, and
//! the tolerance-driven run loop.

use std::time::Instant;

use crate::accel::AccelHook;
use crate::error::{Error, Result};
use crate::linalg::DenseMat;
use crate::record::{ConvergenceRecord, Flag, RunOutcome, StepKind, StopReason};

/// A gradient-type matrix iteration on the constraint sphere.
///
/// Implementors keep the iterate normalized so that the operator-applied
/// iterate has Frobenius norm `sqrt(n)` and positive trace.
pub trait MatrixIteration {
    /// Order `n` of the iterate.
    fn dim(&self) -> usize;

    fn iterate(&self) -> &DenseMat;

    /// Number of steps taken so far.
    fn iteration(&self) -> usize;

    /// Merit of the current iterate.
    fn merit(&self) -> f64;

    /// `||X M - I||_F / sqrt(n)` where `M` is the matrix being inverted.
    fn residual(&self) -> f64;

    /// Frobenius norm of the operator-applied iterate; `sqrt(n)` after any step.
    fn sphere_norm(&self) -> f64;

    /// One iteration with the steplength chosen by `hook`.
    fn step_with(&mut self, hook: &mut AccelHook) -> Result<ConvergenceRecord>;

    /// Replaces the iterate by `x`, re-projected onto the sphere with the
    /// sign fix. Returns `true` if the sign had to be flipped. Step history
    /// used by BB rules is cleared.
    fn restart_from(&mut self, x: DenseMat) -> Result<bool>;

    /// Linear functional used to drive scalar extrapolation: the trace of
    /// `S` times the matrix being inverted.
    fn functional(&self, s: &DenseMat) -> Result<f64>;
}

/// Stopping rule for [`run`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub eps: f64,
    pub maxiter: usize,
    /// Attach the normalized residual to each record.
    pub log_residual: bool,
}

impl RunOptions {
    pub fn new(eps: f64, maxiter: usize) -> Self {
        RunOptions {
            eps,
            maxiter,
            log_residual: false,
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.maxiter == 0 {
            return Err(Error::Config("maxiter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Iterates until the merit drops to `eps` or `maxiter` steps are taken.
///
/// Hitting `maxiter` is not an error; the last record carries
/// [`Flag::MaxIter`]. A breakdown of the steplength formula ends the run
/// with [`StopReason::Stagnation`] and is flagged in the history. Other step
/// errors propagate.
pub fn run<S>(solver: &mut S, opts: &RunOptions, hook: &mut AccelHook) -> Result<RunOutcome>
where
    S: MatrixIteration + ?Sized,
{
    opts.validate()?;
    let start = Instant::now();
    let start_k = solver.iteration();
    let initial_merit = solver.merit();
    let mut history: Vec<ConvergenceRecord> = Vec::new();

    let stop = loop {
        if solver.merit() <= opts.eps {
            break StopReason::Converged;
        }
        if solver.iteration() - start_k >= opts.maxiter {
            if let Some(last) = history.last_mut() {
                last.flag(Flag::MaxIter);
            }
            break StopReason::MaxIter;
        }
        match solver.step_with(hook) {
            Ok(mut rec) => {
                rec.elapsed = start.elapsed().as_secs_f64();
                if opts.log_residual {
                    rec.residual = Some(solver.residual());
                }
                let stationary = rec.has(Flag::Stationary);
                history.push(rec);
                if stationary && solver.merit() > opts.eps {
                    break StopReason::Stationary;
                }
            }
            Err(Error::Stagnation { .. }) => {
                mark_stagnation(&mut history, solver, start);
                break StopReason::Stagnation;
            }
            Err(e) => return Err(e),
        }
    };

    Ok(RunOutcome {
        x: solver.iterate().clone(),
        initial_merit,
        final_merit: solver.merit(),
        iterations: solver.iteration() - start_k,
        history,
        stop,
    })
}

pub(crate) fn mark_stagnation<S>(history: &mut Vec<ConvergenceRecord>, solver: &S, start: Instant)
where
    S: MatrixIteration + ?Sized,
{
    match history.last_mut() {
        Some(last) => last.flag(Flag::Stagnation),
        None => {
            let mut rec = ConvergenceRecord::new(solver.iteration(), solver.merit(), 0.0, StepKind::Optimal);
            rec.elapsed = start.elapsed().as_secs_f64();
            rec.flag(Flag::Stagnation);
            history.push(rec);
        }
    }
}
