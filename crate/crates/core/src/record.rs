//! Per-iteration convergence log shared by every solver and driver.

use std::fmt;

use crate::linalg::DenseMat;

/// How the steplength of an iteration (or the cycle-end matrix) was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepKind {
    Optimal,
    Random,
    Abbmin,
    Extrapolation,
    Fallback,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Optimal => "optimal",
            StepKind::Random => "random",
            StepKind::Abbmin => "abbmin",
            StepKind::Extrapolation => "extrapolation",
            StepKind::Fallback => "fallback",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Event tags attached to a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flag {
    /// `trace(Z A) <= 0` forced `s = -1` in the normalization.
    SignFlip,
    /// The steplength denominator vanished; the run stopped here.
    Stagnation,
    /// Extrapolation produced no column beyond the raw sequence.
    NoAcceleration,
    /// The extrapolated matrix was degenerate and was discarded.
    DegenerateExtrapolation,
    /// A BB quotient was undefined and the optimal steplength was used.
    BbFallback,
    /// The direction vanished: the iterate is stationary.
    Stationary,
    /// The iteration budget ran out on this record.
    MaxIter,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::SignFlip => "sign-flip",
            Flag::Stagnation => "stagnation",
            Flag::NoAcceleration => "no-acceleration",
            Flag::DegenerateExtrapolation => "degenerate-extrapolation",
            Flag::BbFallback => "bb-fallback",
            Flag::Stationary => "stationary",
            Flag::MaxIter => "maxiter",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of a convergence history.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    /// Index of the iterate this record describes.
    pub k: usize,
    pub merit: f64,
    pub alpha: f64,
    pub step_kind: StepKind,
    /// Cumulative seconds since the run started.
    pub elapsed: f64,
    pub flags: Vec<Flag>,
    /// Normalized residual, filled only when residual logging is enabled.
    pub residual: Option<f64>,
}

impl ConvergenceRecord {
    pub fn new(k: usize, merit: f64, alpha: f64, step_kind: StepKind) -> Self {
        ConvergenceRecord {
            k,
            merit,
            alpha,
            step_kind,
            elapsed: 0.0,
            flags: Vec::new(),
            residual: None,
        }
    }

    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn flag(&mut self, flag: Flag) {
        if !self.has(flag) {
            self.flags.push(flag);
        }
    }

    /// Flags joined with `|`, empty when there are none.
    pub fn flags_string(&self) -> String {
        self.flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join("|")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Merit reached the tolerance.
    Converged,
    /// The search direction vanished before the tolerance was met.
    Stationary,
    /// Iteration budget exhausted.
    MaxIter,
    /// The steplength formula broke down.
    Stagnation,
}

/// Final iterate plus the full history of a run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub x: DenseMat,
    pub initial_merit: f64,
    pub final_merit: f64,
    /// Base iterations executed (extrapolation records are not counted).
    pub iterations: usize,
    pub history: Vec<ConvergenceRecord>,
    pub stop: StopReason,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn merits(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.merit).collect()
    }
}
