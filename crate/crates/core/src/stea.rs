//! Scalar ε-algorithm and the simplified topological ε-algorithm (STEA2) for
//! matrix sequences, plus a restarted driver around a base iteration.
//!
//! The scalar table follows Wynn's recursion
//!
//! ```text
//! eps_{-1}^(n) = 0,  eps_0^(n) = s_n,
//! eps_{k+1}^(n) = eps_{k-1}^(n+1) + 1 / (eps_k^(n+1) - eps_k^(n))
//! ```
//!
//! applied to `s_n = y(S_n)` for a linear functional `y`. The matrix
//! columns only exist for even indices:
//!
//! ```text
//! E_0^(n) = S_n
//! E_{2k+2}^(n) = E_{2k}^(n+1)
//!     + (eps_{2k+2}^(n) - eps_{2k}^(n+1)) / (eps_{2k}^(n+2) - eps_{2k}^(n+1))
//!       * (E_{2k}^(n+2) - E_{2k}^(n+1))
//! ```
//!
//! A difference that vanishes to working precision marks the entry invalid
//! and everything depending on it is skipped, so deep columns truncate
//! instead of filling with infinities.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::accel::AccelHook;
use crate::error::{Error, Result};
use crate::linalg::{fro_inner, DenseMat, DEGENERACY_FACTOR, UNIT_ROUNDOFF};
use crate::record::{ConvergenceRecord, Flag, RunOutcome, StepKind, StopReason};
use crate::solver::{mark_stagnation, MatrixIteration, RunOptions};

fn vanishes(a: f64, b: f64) -> bool {
    let d = a - b;
    !d.is_finite() || d == 0.0 || d.abs() <= DEGENERACY_FACTOR * UNIT_ROUNDOFF * a.abs().max(b.abs())
}

/// Triangular ε-table. Column `k` holds `len - k` entries; `None` marks an
/// entry that could not be computed.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarTable {
    cols: Vec<Vec<Option<f64>>>,
}

impl ScalarTable {
    /// `eps_k^(n)`, or `None` when out of range or invalid.
    pub fn get(&self, k: usize, n: usize) -> Option<f64> {
        self.cols.get(k).and_then(|c| c.get(n)).copied().flatten()
    }

    /// Number of columns, counting column 0.
    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, k: usize) -> &[Option<f64>] {
        &self.cols[k]
    }

    /// Deepest even column with at least one valid entry.
    pub fn deepest_even_column(&self) -> usize {
        (0..self.cols.len())
            .step_by(2)
            .rfind(|&k| self.cols[k].iter().any(Option::is_some))
            .unwrap_or(0)
    }
}

/// Fills the whole scalar ε-table of `seq`.
pub fn scalar_epsilon(seq: &[f64]) -> Result<ScalarTable> {
    if seq.is_empty() {
        return Err(Error::Config("ε-algorithm needs at least one term".into()));
    }
    let len = seq.len();
    let mut cols: Vec<Vec<Option<f64>>> = vec![seq.iter().map(|&s| Some(s)).collect()];
    for k in 0..len - 1 {
        let next: Vec<Option<f64>> = (0..len - k - 1)
            .map(|n| {
                let hi = cols[k][n + 1]?;
                let lo = cols[k][n]?;
                let back = if k == 0 { 0.0 } else { cols[k - 1][n + 1]? };
                if vanishes(hi, lo) {
                    return None;
                }
                let v = back + 1.0 / (hi - lo);
                v.is_finite().then_some(v)
            })
            .collect();
        cols.push(next);
    }
    Ok(ScalarTable { cols })
}

/// Result of one STEA2 extrapolation.
#[derive(Clone, Debug)]
pub struct Extrapolation {
    pub matrix: DenseMat,
    /// Even column the matrix was read from; 0 means no acceleration.
    pub column: usize,
}

impl Extrapolation {
    pub fn accelerated(&self) -> bool {
        self.column > 0
    }
}

/// STEA2 table built from the terms and their functional values.
#[derive(Clone, Debug)]
pub struct EpsilonTable {
    pub scalar: ScalarTable,
    /// `matrix[j][n]` holds `E_{2j}^(n)`.
    pub matrix: Vec<Vec<Option<DenseMat>>>,
    pub terms_consumed: usize,
}

impl EpsilonTable {
    pub fn build(seq: &[DenseMat], scalars: &[f64]) -> Result<Self> {
        if seq.is_empty() || seq.len() != scalars.len() {
            return Err(Error::Config(format!(
                "STEA2 needs matching terms and functional values, got {} and {}",
                seq.len(),
                scalars.len()
            )));
        }
        let shape = seq[0].shape();
        if let Some(bad) = seq.iter().find(|s| s.shape() != shape) {
            return Err(Error::Dimension {
                op: "stea2",
                lhs: shape,
                rhs: bad.shape(),
            });
        }
        let scalar = scalar_epsilon(scalars)?;
        let len = seq.len();
        let mut matrix: Vec<Vec<Option<DenseMat>>> = vec![seq.iter().cloned().map(Some).collect()];

        let mut j = 0;
        while 2 * j + 2 < len {
            let k = 2 * j;
            let prev = &matrix[j];
            let mut next = Vec::with_capacity(len - k - 2);
            for n in 0..len - k - 2 {
                next.push(stea2_entry(&scalar, prev, k, n)?);
            }
            let any = next.iter().any(Option::is_some);
            matrix.push(next);
            if !any {
                break;
            }
            j += 1;
        }
        Ok(EpsilonTable {
            scalar,
            matrix,
            terms_consumed: len,
        })
    }

    /// Most recent entry of the deepest valid even column.
    pub fn best(&self) -> Extrapolation {
        for (j, col) in self.matrix.iter().enumerate().rev() {
            if let Some(m) = col.iter().rev().flatten().next() {
                return Extrapolation {
                    matrix: m.clone(),
                    column: 2 * j,
                };
            }
        }
        unreachable!("column 0 always holds the raw terms")
    }
}

fn stea2_entry(scalar: &ScalarTable, prev: &[Option<DenseMat>], k: usize, n: usize) -> Result<Option<DenseMat>> {
    let (Some(e_up), Some(e_mid), Some(e_next)) = (scalar.get(k + 2, n), scalar.get(k, n + 1), scalar.get(k, n + 2))
    else {
        return Ok(None);
    };
    let (Some(m1), Some(m2)) = (&prev[n + 1], &prev[n + 2]) else {
        return Ok(None);
    };
    if vanishes(e_next, e_mid) {
        return Ok(None);
    }
    let ratio = (e_up - e_mid) / (e_next - e_mid);
    if !ratio.is_finite() {
        return Ok(None);
    }
    let mut out = m2.sub(m1)?;
    out.scale_in_place(ratio);
    out.add_scaled(1.0, m1)?;
    Ok(out.is_finite().then_some(out))
}

/// Extrapolates a matrix sequence with STEA2 using the functional `y`.
/// Returns the deepest valid even-column entry, or the last term with
/// column 0 when no column beyond the raw sequence could be formed.
pub fn stea2_extrapolate<F>(seq: &[DenseMat], y: F) -> Result<Extrapolation>
where
    F: Fn(&DenseMat) -> f64,
{
    let scalars: Vec<f64> = seq.iter().map(&y).collect();
    Ok(EpsilonTable::build(seq, &scalars)?.best())
}

/// Linear functional turning matrix terms into scalars for the ε-table.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Functional {
    /// `trace(S M)` where `M` is the matrix being inverted: the same pairing
    /// the merit numerator uses.
    #[default]
    Operator,
    /// `trace(S)`.
    Trace,
    /// `<R, S>_F` for a standard normal `R` drawn from the seed.
    Random(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteaConfig {
    pub ncycle: usize,
    pub mcol: usize,
    pub functional: Functional,
}

impl SteaConfig {
    pub fn new(ncycle: usize, mcol: usize) -> Self {
        SteaConfig {
            ncycle,
            mcol,
            functional: Functional::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ncycle == 0 || self.mcol == 0 {
            return Err(Error::Config(format!(
                "NCYCLE and MCOL must be positive, got {} and {}",
                self.ncycle, self.mcol
            )));
        }
        Ok(())
    }

    /// Highest even column reachable in one cycle.
    pub fn target_column(&self) -> usize {
        2 * (self.mcol / 2)
    }
}

struct Evaluator {
    functional: Functional,
    random: Option<DenseMat>,
}

impl Evaluator {
    fn new(functional: &Functional, n: usize) -> Self {
        let random = match functional {
            Functional::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Some(DenseMat::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng)))
            }
            _ => None,
        };
        Evaluator {
            functional: *functional,
            random,
        }
    }

    fn eval<S: MatrixIteration + ?Sized>(&self, solver: &S, s: &DenseMat) -> Result<f64> {
        match self.functional {
            Functional::Operator => solver.functional(s),
            Functional::Trace => Ok(s.trace()),
            Functional::Random(_) => fro_inner(self.random.as_ref().unwrap(), s),
        }
    }
}

/// Restarted STEA2 around a base iteration.
///
/// Each cycle advances the base solver `mcol` plain steps, collecting the
/// current iterate and the `mcol` new ones, extrapolates them, re-projects
/// the extrapolated matrix onto the sphere and restarts from it. The run
/// stops as soon as the merit reaches `opts.eps`, after `ncycle` cycles, or
/// after `opts.maxiter` base steps. Every base step is recorded, followed by
/// one [`StepKind::Extrapolation`] record per cycle carrying the same `k` as
/// the last base step of that cycle.
pub fn restarted_drive<S>(solver: &mut S, cfg: &SteaConfig, opts: &RunOptions) -> Result<RunOutcome>
where
    S: MatrixIteration + ?Sized,
{
    cfg.validate()?;
    opts.validate()?;
    let start = Instant::now();
    let start_k = solver.iteration();
    let initial_merit = solver.merit();
    let evaluator = Evaluator::new(&cfg.functional, solver.dim());
    let mut hook = AccelHook::none();
    let mut history: Vec<ConvergenceRecord> = Vec::new();

    let stop = 'cycles: {
        for _cycle in 0..cfg.ncycle {
            if solver.merit() <= opts.eps {
                break 'cycles StopReason::Converged;
            }
            let mut terms = vec![solver.iterate().clone()];
            let mut scalars = vec![evaluator.eval(solver, solver.iterate())?];
            for _ in 0..cfg.mcol {
                if solver.merit() <= opts.eps {
                    break 'cycles StopReason::Converged;
                }
                if solver.iteration() - start_k >= opts.maxiter {
                    if let Some(last) = history.last_mut() {
                        last.flag(Flag::MaxIter);
                    }
                    break 'cycles StopReason::MaxIter;
                }
                match solver.step_with(&mut hook) {
                    Ok(mut rec) => {
                        rec.elapsed = start.elapsed().as_secs_f64();
                        if opts.log_residual {
                            rec.residual = Some(solver.residual());
                        }
                        let stationary = rec.has(Flag::Stationary);
                        history.push(rec);
                        if stationary {
                            break 'cycles if solver.merit() <= opts.eps {
                                StopReason::Converged
                            } else {
                                StopReason::Stationary
                            };
                        }
                    }
                    Err(Error::Stagnation { .. }) => {
                        mark_stagnation(&mut history, solver, start);
                        break 'cycles StopReason::Stagnation;
                    }
                    Err(e) => return Err(e),
                }
                terms.push(solver.iterate().clone());
                scalars.push(evaluator.eval(solver, solver.iterate())?);
            }
            if solver.merit() <= opts.eps {
                break 'cycles StopReason::Converged;
            }

            let table = EpsilonTable::build(&terms, &scalars)?;
            let ext = table.best();
            let mut rec = ConvergenceRecord::new(solver.iteration(), 0.0, 0.0, StepKind::Extrapolation);
            if !ext.accelerated() {
                rec.flag(Flag::NoAcceleration);
            } else {
                match solver.restart_from(ext.matrix) {
                    Ok(true) => rec.flag(Flag::SignFlip),
                    Ok(false) => {}
                    Err(Error::DegenerateIterate { .. } | Error::NonFinite(_)) => {
                        rec.flag(Flag::DegenerateExtrapolation)
                    }
                    Err(e) => return Err(e),
                }
            }
            rec.merit = solver.merit();
            rec.elapsed = start.elapsed().as_secs_f64();
            if opts.log_residual {
                rec.residual = Some(solver.residual());
            }
            history.push(rec);
        }
        if solver.merit() <= opts.eps {
            StopReason::Converged
        } else {
            if let Some(last) = history.last_mut() {
                last.flag(Flag::MaxIter);
            }
            StopReason::MaxIter
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aitken_kernel_is_exact_in_column_two() {
        let seq: Vec<f64> = (0..8).map(|n| 3.0 + 0.5f64.powi(n)).collect();
        let t = scalar_epsilon(&seq).unwrap();
        for n in 0..6 {
            assert!((t.get(2, n).unwrap() - 3.0).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn constant_sequence_has_no_even_columns() {
        let t = scalar_epsilon(&[7.0; 5]).unwrap();
        assert!(t.column(1).iter().all(Option::is_none));
        assert!(t.column(2).iter().all(Option::is_none));
        assert_eq!(t.deepest_even_column(), 0);
        assert_eq!(t.get(0, 4), Some(7.0));
    }

    #[test]
    fn two_mode_kernel_is_exact_in_column_four() {
        let seq: Vec<f64> = (0..5).map(|n| 1.0 + 0.6f64.powi(n) + 0.2f64.powi(n)).collect();
        let t = scalar_epsilon(&seq).unwrap();
        assert!((t.get(4, 0).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(t.deepest_even_column(), 4);
    }

    #[test]
    fn single_term_table() {
        let t = scalar_epsilon(&[2.5]).unwrap();
        assert_eq!(t.num_cols(), 1);
        assert!(scalar_epsilon(&[]).is_err());
    }

    fn rank_one_sequence(len: usize) -> (DenseMat, Vec<DenseMat>) {
        let s = DenseMat::from_rows(&[&[1.0, -2.0, 0.5], &[3.0, 4.0, -1.0], &[0.0, 2.0, 6.0]]).unwrap();
        let d = DenseMat::from_rows(&[&[0.3, 1.0, 0.0], &[-2.0, 0.7, 0.4], &[1.0, 0.0, 0.2]]).unwrap();
        let seq = (0..len)
            .map(|n| DenseMat::axpy(0.5f64.powi(n as i32), &d, &s).unwrap())
            .collect();
        (s, seq)
    }

    #[test]
    fn rank_one_matrix_kernel_recovered() {
        let (s, seq) = rank_one_sequence(3);
        let ext = stea2_extrapolate(&seq, |m| m.trace()).unwrap();
        assert_eq!(ext.column, 2);
        assert!(ext.matrix.max_abs_diff(&s) < 1e-12);

        let (s, seq) = rank_one_sequence(6);
        let table = EpsilonTable::build(&seq, &seq.iter().map(|m| m.trace()).collect::<Vec<_>>()).unwrap();
        for e in table.matrix[1].iter() {
            assert!(e.as_ref().unwrap().max_abs_diff(&s) < 1e-12);
        }
    }

    #[test]
    fn constant_matrix_sequence_returns_constant() {
        let c = DenseMat::from_rows(&[&[1.0, 2.0], &[2.0, 5.0]]).unwrap();
        let ext = stea2_extrapolate(&vec![c.clone(); 5], |m| m.trace()).unwrap();
        assert!(!ext.accelerated());
        assert_eq!(ext.matrix, c);
    }

    #[test]
    fn two_terms_cannot_accelerate() {
        let (_, seq) = rank_one_sequence(2);
        let ext = stea2_extrapolate(&seq, |m| m.trace()).unwrap();
        assert_eq!(ext.column, 0);
        assert_eq!(ext.matrix, seq[1]);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let (_, seq) = rank_one_sequence(3);
        assert!(EpsilonTable::build(&seq, &[1.0, 2.0]).is_err());
        let mixed = vec![DenseMat::identity(2), DenseMat::identity(3)];
        assert!(EpsilonTable::build(&mixed, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SteaConfig::new(0, 8).validate().is_err());
        assert!(SteaConfig::new(8, 0).validate().is_err());
        assert_eq!(SteaConfig::new(8, 8).target_column(), 8);
        assert_eq!(SteaConfig::new(8, 5).target_column(), 4);
    }
}
