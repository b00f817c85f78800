//! `mincos`: run the approximate-inverse solvers on gallery or Matrix Market
//! matrices and write convergence histories as CSV.
//!
//! Exit status: 0 when the merit reached `--eps`, 2 when the run stopped
//! short of it, 1 on any error.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mincos_core::scenario::{self, Accel, Mode, ScenarioOutcome, SolverConfig};
use mincos_core::{Error, Functional, MatrixSpec};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Gallery {
    Poisson2d,
    Poisson3d,
    Wathen,
    Lehmer,
    Randn,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliMode {
    Spd,
    Ls,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliFunctional {
    /// trace(S M) with M the matrix being inverted
    Operator,
    /// trace(S)
    Trace,
    /// <R, S> for a seeded normal R
    Random,
}

#[derive(Debug, Parser)]
#[command(name = "mincos", version, about = "Approximate inverses by cosine maximization")]
struct Cli {
    /// Gallery matrix to build
    #[arg(long, conflicts_with = "mtx", required_unless_present = "mtx")]
    gallery: Option<Gallery>,

    /// Grid side for poisson2d/poisson3d
    #[arg(long, default_value_t = 10)]
    g: usize,

    /// Order for lehmer, columns for randn
    #[arg(long)]
    n: Option<usize>,

    /// Rows for randn
    #[arg(long)]
    m: Option<usize>,

    /// Block count for wathen
    #[arg(long = "N", default_value_t = 30)]
    blocks: usize,

    /// Matrix Market file
    #[arg(long)]
    mtx: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = CliMode::Spd)]
    mode: CliMode,

    #[arg(long, default_value_t = 1e-6)]
    eps: f64,

    #[arg(long, default_value_t = 1000)]
    maxiter: usize,

    /// One mode, or a comma list to compare: none, random, random-tstar, abbmin, stea2
    #[arg(long, default_value = "none", value_delimiter = ',')]
    accel: Vec<String>,

    /// Half-width of the random relaxation interval
    #[arg(long, default_value_t = 0.5)]
    eta: f64,

    /// Seed for random relaxation and random gallery matrices
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// ABBmin switching threshold
    #[arg(long, default_value_t = 0.8)]
    tau: f64,

    /// ABBmin window M
    #[arg(long, default_value_t = 10)]
    window: usize,

    #[arg(long, default_value_t = 8)]
    ncycle: usize,

    #[arg(long, default_value_t = 8)]
    mcol: usize,

    /// Scalar functional driving STEA2
    #[arg(long, value_enum, default_value_t = CliFunctional::Operator)]
    functional: CliFunctional,

    /// Symmetrize each SPD iterate before normalizing
    #[arg(long)]
    symmetrize: bool,

    /// Add a residual column to the history
    #[arg(long)]
    residual: bool,

    /// History CSV path; with several modes, one file per mode with the mode
    /// appended to the stem. Defaults to stdout for a single run.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn spec(&self) -> MatrixSpec {
        if let Some(path) = &self.mtx {
            return MatrixSpec::MtxFile { path: path.clone() };
        }
        match self.gallery.expect("clap enforces gallery or mtx") {
            Gallery::Poisson2d => MatrixSpec::Poisson2d { g: self.g },
            Gallery::Poisson3d => MatrixSpec::Poisson3d { g: self.g },
            Gallery::Wathen => MatrixSpec::Wathen {
                nb: self.blocks,
                seed: self.seed,
            },
            Gallery::Lehmer => MatrixSpec::Lehmer {
                n: self.n.unwrap_or(20),
            },
            Gallery::Randn => MatrixSpec::Randn {
                m: self.m.unwrap_or(100),
                n: self.n.unwrap_or(80),
                seed: self.seed,
            },
        }
    }

    fn config(&self) -> SolverConfig {
        SolverConfig {
            eps: self.eps,
            maxiter: self.maxiter,
            accel: Accel::None,
            eta: self.eta,
            seed: self.seed,
            tau: self.tau,
            window: self.window,
            ncycle: self.ncycle,
            mcol: self.mcol,
            functional: match self.functional {
                CliFunctional::Operator => Functional::Operator,
                CliFunctional::Trace => Functional::Trace,
                CliFunctional::Random => Functional::Random(self.seed),
            },
            symmetrize: self.symmetrize,
            residual: self.residual,
        }
    }

    fn mode(&self) -> Mode {
        match self.mode {
            CliMode::Spd => Mode::Spd,
            CliMode::Ls => Mode::Ls,
        }
    }
}

fn report(o: &ScenarioOutcome) {
    if let Some(note) = &o.note {
        eprintln!("note: {note}");
    }
    eprintln!("{}", o.summary());
}

fn single(cli: &Cli, config: SolverConfig) -> Result<i32, Error> {
    let o = scenario::run_scenario(&cli.spec(), &config, cli.mode())?;
    match &cli.out {
        Some(path) => scenario::write_history_file(path, &o.outcome.history, config.residual)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            scenario::write_history_csv(&mut lock, &o.outcome.history, config.residual)?;
            let _ = lock.flush();
        }
    }
    report(&o);
    if o.exit_code() == 1 {
        eprintln!("error: steplength breakdown at iteration {}", o.outcome.iterations);
    }
    Ok(o.exit_code())
}

fn compare(cli: &Cli, base: SolverConfig, accels: &[Accel]) -> Result<i32, Error> {
    let results = scenario::compare_scenarios(&cli.spec(), &base, accels, cli.mode())?;
    let mut code = 0;
    for (acc, r) in &results {
        match r {
            Ok(o) => {
                if let Some(out) = &cli.out {
                    scenario::write_history_file(
                        &scenario::per_run_path(out, *acc),
                        &o.outcome.history,
                        base.residual,
                    )?;
                }
                report(o);
                code = code.max(o.exit_code());
            }
            Err(e) => {
                eprintln!("error: {acc}: {e}");
                code = 1;
            }
        }
    }
    print!("{}", scenario::comparison_table(&results));
    // an error outranks a missed tolerance
    Ok(
        if results
            .iter()
            .any(|(_, r)| r.is_err() || matches!(r, Ok(o) if o.exit_code() == 1))
        {
            1
        } else {
            code
        },
    )
}

fn run(cli: &Cli) -> Result<i32, Error> {
    let accels = cli
        .accel
        .iter()
        .map(|s| s.parse::<Accel>())
        .collect::<Result<Vec<_>, _>>()?;
    let config = cli.config();
    match accels.as_slice() {
        [] => Err(Error::Config("no acceleration mode given".into())),
        [one] => single(cli, config.with_accel(*one)),
        many => compare(cli, config, many),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
