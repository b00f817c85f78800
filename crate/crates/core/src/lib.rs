//! Approximate inverses by maximizing the cosine to the identity.
//!
//! [`mincos::MinCos`] iterates towards `A⁻¹` for SPD `A`;
//! [`mincosls::MinCosLs`] iterates towards `(AᵀA)⁻¹` for a full column rank
//! `A` without ever forming or applying `Aᵀ`. Steplength variants live in
//! [`accel`], matrix extrapolation in [`stea`], test matrices and Matrix
//! Market I/O in [`gallery`] and [`mtx`], and the harness plumbing in
//! [`scenario`].

pub mod accel;
pub mod error;
pub mod gallery;
pub mod linalg;
pub mod mincos;
pub mod mincosls;
pub mod mtx;
pub mod record;
pub mod scenario;
pub mod solver;
pub mod stea;

pub use accel::{AccelHook, AccelMode};
pub use error::{Error, Result};
pub use gallery::MatrixSpec;
pub use linalg::{cosine_to_identity, fro_inner, fro_norm, merit, DenseMat, SparseOp};
pub use mincos::MinCos;
pub use mincosls::MinCosLs;
pub use record::{ConvergenceRecord, Flag, RunOutcome, StepKind, StopReason};
pub use scenario::{Accel, Mode, ScenarioOutcome, SolverConfig};
pub use solver::{MatrixIteration, RunOptions};
pub use stea::{Functional, SteaConfig};
