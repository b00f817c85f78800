//! Scenario runner behind the command-line harness: solver configuration,
//! single and comparative runs, history CSV and exit-status mapping.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::accel::{AccelHook, DEFAULT_ETA, DEFAULT_TAU, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::gallery::MatrixSpec;
use crate::linalg::SparseOp;
use crate::mincos::MinCos;
use crate::mincosls::MinCosLs;
use crate::record::{ConvergenceRecord, RunOutcome, StopReason};
use crate::solver::{self, MatrixIteration, RunOptions};
use crate::stea::{restarted_drive, Functional, SteaConfig};

/// Header of every history CSV.
pub const CSV_HEADER: [&str; 6] = ["k", "merit", "alpha", "step_kind", "elapsed_s", "flags"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Accel {
    None,
    Random,
    RandomTstar,
    Abbmin,
    Stea2,
}

impl Accel {
    pub const ALL: [Accel; 5] = [
        Accel::None,
        Accel::Random,
        Accel::RandomTstar,
        Accel::Abbmin,
        Accel::Stea2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Accel::None => "none",
            Accel::Random => "random",
            Accel::RandomTstar => "random-tstar",
            Accel::Abbmin => "abbmin",
            Accel::Stea2 => "stea2",
        }
    }
}

impl fmt::Display for Accel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Accel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Accel::ALL
            .into_iter()
            .find(|a| a.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown acceleration `{s}`")))
    }
}

/// Which iteration to run: square SPD or least squares on `AᵀA`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Spd,
    Ls,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Spd => "spd",
            Mode::Ls => "ls",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spd" => Ok(Mode::Spd),
            "ls" => Ok(Mode::Ls),
            _ => Err(Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub maxiter: usize,
    pub accel: Accel,
    pub eta: f64,
    pub seed: u64,
    pub tau: f64,
    pub window: usize,
    pub ncycle: usize,
    pub mcol: usize,
    pub functional: Functional,
    pub symmetrize: bool,
    pub residual: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps: 1e-6,
            maxiter: 1000,
            accel: Accel::None,
            eta: DEFAULT_ETA,
            seed: 1,
            tau: DEFAULT_TAU,
            window: DEFAULT_WINDOW,
            ncycle: 8,
            mcol: 8,
            functional: Functional::Operator,
            symmetrize: false,
            residual: false,
        }
    }
}

impl SolverConfig {
    pub fn with_accel(&self, accel: Accel) -> Self {
        SolverConfig { accel, ..self.clone() }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            eps: self.eps,
            maxiter: self.maxiter,
            log_residual: self.residual,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.run_options().validate()?;
        match self.accel {
            Accel::Stea2 => self.stea().validate()?,
            _ => {
                self.hook()?;
            }
        }
        Ok(())
    }

    pub fn stea(&self) -> SteaConfig {
        SteaConfig {
            ncycle: self.ncycle,
            mcol: self.mcol,
            functional: self.functional,
        }
    }

    /// Steplength hook for the non-extrapolating modes.
    pub fn hook(&self) -> Result<AccelHook> {
        match self.accel {
            Accel::None | Accel::Stea2 => Ok(AccelHook::none()),
            Accel::Random => AccelHook::random(self.eta, self.seed),
            Accel::RandomTstar => AccelHook::random_tstar(self.eta, self.seed),
            Accel::Abbmin => AccelHook::abbmin(self.tau, self.window),
        }
    }
}

/// Result of one configured run.
#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub label: String,
    pub accel: Accel,
    pub mode: Mode,
    pub shape: (usize, usize),
    pub outcome: RunOutcome,
    pub wall_s: f64,
    pub note: Option<String>,
}

impl ScenarioOutcome {
    /// 0 when the tolerance was met, 2 when the run stopped short of it
    /// (budget exhausted or a vanishing direction), 1 on steplength
    /// breakdown.
    pub fn exit_code(&self) -> i32 {
        match self.outcome.stop {
            StopReason::Converged => 0,
            StopReason::MaxIter | StopReason::Stationary => 2,
            StopReason::Stagnation => 1,
        }
    }

    pub fn stop_str(&self) -> &'static str {
        match self.outcome.stop {
            StopReason::Converged => "converged",
            StopReason::MaxIter => "maxiter",
            StopReason::Stationary => "stationary",
            StopReason::Stagnation => "stagnation",
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{} [{} {}x{}] accel={} stop={} iterations={} final_merit={:e} wall_s={:.3}",
            self.label,
            self.mode.as_str(),
            self.shape.0,
            self.shape.1,
            self.accel,
            self.stop_str(),
            self.outcome.iterations,
            self.outcome.final_merit,
            self.wall_s
        )
    }
}

/// Orients a random normal spec for least squares so that `m ≥ n`.
/// Returns the spec to build and a note when it was transposed.
pub fn orient(spec: &MatrixSpec, mode: Mode) -> (MatrixSpec, Option<String>) {
    match *spec {
        MatrixSpec::Randn { m, n, seed } if mode == Mode::Ls && m < n => (
            MatrixSpec::Randn { m: n, n: m, seed },
            Some(format!(
                "randn {m}x{n} has fewer rows than columns; generated {n}x{m} instead"
            )),
        ),
        _ => (spec.clone(), None),
    }
}

/// Runs one configuration on an already built operator.
pub fn run_on(a: &SparseOp, label: &str, config: &SolverConfig, mode: Mode) -> Result<ScenarioOutcome> {
    config.validate()?;
    let opts = config.run_options();
    let start = Instant::now();
    let outcome = match mode {
        Mode::Spd => {
            let mut s = MinCos::new(a)?.with_symmetrize(config.symmetrize);
            drive(&mut s, config, &opts)?
        }
        Mode::Ls => {
            let mut s = MinCosLs::new(a)?;
            drive(&mut s, config, &opts)?
        }
    };
    Ok(ScenarioOutcome {
        label: label.to_string(),
        accel: config.accel,
        mode,
        shape: a.shape(),
        outcome,
        wall_s: start.elapsed().as_secs_f64(),
        note: None,
    })
}

fn drive<S: MatrixIteration>(s: &mut S, config: &SolverConfig, opts: &RunOptions) -> Result<RunOutcome> {
    match config.accel {
        Accel::Stea2 => restarted_drive(s, &config.stea(), opts),
        _ => solver::run(s, opts, &mut config.hook()?),
    }
}

/// Builds the matrix named by `spec` and runs one configuration on it.
pub fn run_scenario(spec: &MatrixSpec, config: &SolverConfig, mode: Mode) -> Result<ScenarioOutcome> {
    config.validate()?;
    let (spec, note) = orient(spec, mode);
    let a = spec.build()?;
    let mut out = run_on(&a, &spec.to_string(), config, mode)?;
    out.note = note;
    Ok(out)
}

/// Runs every acceleration in `accels` on the same matrix, concurrently.
/// A failing run does not stop the others.
pub fn compare_scenarios(
    spec: &MatrixSpec,
    base: &SolverConfig,
    accels: &[Accel],
    mode: Mode,
) -> Result<Vec<(Accel, Result<ScenarioOutcome>)>> {
    let (spec, note) = orient(spec, mode);
    let a = spec.build()?;
    let label = spec.to_string();
    Ok(accels
        .par_iter()
        .map(|&acc| {
            let r = run_on(&a, &label, &base.with_accel(acc), mode).map(|mut o| {
                o.note = note.clone();
                o
            });
            (acc, r)
        })
        .collect())
}

/// One line per run: mode, stop reason, iterations, final merit.
pub fn comparison_table(results: &[(Accel, Result<ScenarioOutcome>)]) -> String {
    let mut s = format!("{:<14}{:<12}{:>10}{:>14}\n", "accel", "stop", "iters", "final_merit");
    for (acc, r) in results {
        match r {
            Ok(o) => s.push_str(&format!(
                "{:<14}{:<12}{:>10}{:>14.3e}\n",
                acc.as_str(),
                o.stop_str(),
                o.outcome.iterations,
                o.outcome.final_merit
            )),
            Err(e) => s.push_str(&format!(
                "{:<14}{:<12}{:>10}{:>14}  {e}\n",
                acc.as_str(),
                "error",
                "-",
                "-"
            )),
        }
    }
    s
}

/// Writes the history as CSV. A `residual` column is appended when
/// `with_residual` is set.
pub fn write_history_csv<W: Write>(w: W, history: &[ConvergenceRecord], with_residual: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if with_residual {
        let mut h: Vec<&str> = CSV_HEADER.to_vec();
        h.push("residual");
        out.write_record(&h)?;
    } else {
        out.write_record(CSV_HEADER)?;
    }
    for r in history {
        let mut row = vec![
            r.k.to_string(),
            format!("{:e}", r.merit),
            format!("{:e}", r.alpha),
            r.step_kind.as_str().to_string(),
            format!("{:.9}", r.elapsed),
            r.flags_string(),
        ];
        if with_residual {
            row.push(r.residual.map(|v| format!("{v:e}")).unwrap_or_default());
        }
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_history_file(path: &Path, history: &[ConvergenceRecord], with_residual: bool) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_history_csv(std::io::BufWriter::new(file), history, with_residual)
}

/// `out.csv` becomes `out_<accel>.csv`.
pub fn per_run_path(base: &Path, accel: Accel) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("history");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_{}.{ext}", accel.as_str()))
}

/// CSV text with the elapsed column blanked, for reproducibility checks.
pub fn strip_timing(csv_text: &str) -> String {
    csv_text
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            if f.len() > 4 {
                f[4] = "";
            }
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
