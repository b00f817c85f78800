//! Test matrices: Poisson 2D/3D, Wathen, Lehmer, seeded normal, and the
//! spec type naming one of them or a Matrix Market file.
//!
//! Random draws come from `ChaCha8Rng::seed_from_u64(seed)`. Normal
//! variates use the ziggurat sampler of `rand_distr::StandardNormal`,
//! filled row by row.

use std::fmt;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{DenseMat, SparseOp};
use crate::mtx;

fn assemble(n: usize, triplets: &[(usize, usize, f64)]) -> SparseOp {
    SparseOp::from_triplets(n, n, triplets).expect("generator triplets are in range and finite")
}

/// 5-point Laplacian on a `g`×`g` grid, `n = g²`.
pub fn poisson2d(g: usize) -> SparseOp {
    assert!(g >= 1, "grid side must be positive");
    let idx = |i: usize, j: usize| i * g + j;
    let mut t = Vec::with_capacity(5 * g * g);
    for i in 0..g {
        for j in 0..g {
            let r = idx(i, j);
            t.push((r, r, 4.0));
            if i > 0 {
                t.push((r, idx(i - 1, j), -1.0));
            }
            if i + 1 < g {
                t.push((r, idx(i + 1, j), -1.0));
            }
            if j > 0 {
                t.push((r, idx(i, j - 1), -1.0));
            }
            if j + 1 < g {
                t.push((r, idx(i, j + 1), -1.0));
            }
        }
    }
    assemble(g * g, &t)
}

/// 7-point Laplacian on a `g`×`g`×`g` grid, `n = g³`.
pub fn poisson3d(g: usize) -> SparseOp {
    assert!(g >= 1, "grid side must be positive");
    let idx = |i: usize, j: usize, l: usize| (i * g + j) * g + l;
    let mut t = Vec::with_capacity(7 * g * g * g);
    for i in 0..g {
        for j in 0..g {
            for l in 0..g {
                let r = idx(i, j, l);
                t.push((r, r, 6.0));
                let mut nb = |c: usize| t.push((r, c, -1.0));
                if i > 0 {
                    nb(idx(i - 1, j, l));
                }
                if i + 1 < g {
                    nb(idx(i + 1, j, l));
                }
                if j > 0 {
                    nb(idx(i, j - 1, l));
                }
                if j + 1 < g {
                    nb(idx(i, j + 1, l));
                }
                if l > 0 {
                    nb(idx(i, j, l - 1));
                }
                if l + 1 < g {
                    nb(idx(i, j, l + 1));
                }
            }
        }
    }
    assemble(g * g * g, &t)
}

const WATHEN_E1: [[f64; 4]; 4] = [
    [6.0, -6.0, 2.0, -8.0],
    [-6.0, 32.0, -6.0, 20.0],
    [2.0, -6.0, 6.0, -6.0],
    [-8.0, 20.0, -6.0, 32.0],
];
const WATHEN_E2: [[f64; 4]; 4] = [
    [3.0, -8.0, 2.0, -6.0],
    [-8.0, 16.0, -8.0, 20.0],
    [2.0, -8.0, 3.0, -8.0],
    [-6.0, 20.0, -8.0, 16.0],
];

fn wathen_element() -> [[f64; 8]; 8] {
    let mut e = [[0.0; 8]; 8];
    for r in 0..4 {
        for c in 0..4 {
            e[r][c] = WATHEN_E1[r][c] / 45.0;
            e[r + 4][c + 4] = WATHEN_E1[r][c] / 45.0;
            e[r][c + 4] = WATHEN_E2[r][c] / 45.0;
            e[r + 4][c] = WATHEN_E2[c][r] / 45.0;
        }
    }
    e
}

/// Order of `wathen(nb)`.
pub fn wathen_order(nb: usize) -> usize {
    3 * nb * nb + 4 * nb + 1
}

/// Consistent mass matrix of an `nb`×`nb` grid of 8-node serendipity
/// elements with element densities `100·U(0,1)`, assembled in the classic
/// gallery node ordering.
pub fn wathen(nb: usize, seed: u64) -> SparseOp {
    assert!(nb >= 1, "block count must be positive");
    let (nx, ny) = (nb, nb);
    let n = 3 * nx * ny + 2 * nx + 2 * ny + 1;
    let e = wathen_element();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // column-major draw order, matching rand(nx, ny)
    let mut rho = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            rho[i * ny + j] = 100.0 * rng.random::<f64>();
        }
    }
    let mut t = Vec::with_capacity(64 * nx * ny);
    for j in 1..=ny {
        for i in 1..=nx {
            let mut nn = [0usize; 8];
            nn[0] = 3 * j * nx + 2 * i + 2 * j + 1;
            nn[1] = nn[0] - 1;
            nn[2] = nn[1] - 1;
            nn[3] = (3 * j - 1) * nx + 2 * j + i - 1;
            nn[4] = 3 * (j - 1) * nx + 2 * i + 2 * j - 3;
            nn[5] = nn[4] + 1;
            nn[6] = nn[5] + 1;
            nn[7] = nn[3] + 1;
            let r = rho[(i - 1) * ny + (j - 1)];
            for a in 0..8 {
                for b in 0..8 {
                    t.push((nn[a] - 1, nn[b] - 1, e[a][b] * r));
                }
            }
        }
    }
    assemble(n, &t)
}

/// `L[i][j] = min(i,j)/max(i,j)` with 1-based indices.
pub fn lehmer(n: usize) -> DenseMat {
    assert!(n >= 1, "order must be positive");
    DenseMat::from_fn(n, n, |i, j| {
        let (a, b) = ((i + 1) as f64, (j + 1) as f64);
        a.min(b) / a.max(b)
    })
}

pub fn lehmer_op(n: usize) -> SparseOp {
    SparseOp::from_dense(&lehmer(n)).expect("lehmer entries are finite")
}

/// `m`×`n` matrix of i.i.d. standard normals.
pub fn randn_mat(m: usize, n: usize, seed: u64) -> DenseMat {
    assert!(m >= 1 && n >= 1, "dimensions must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMat::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

pub fn randn_op(m: usize, n: usize, seed: u64) -> SparseOp {
    SparseOp::from_dense(&randn_mat(m, n, seed)).expect("normal draws are finite")
}

/// `G Gᵀ / n + I/2` for a normal `G`; exactly symmetric.
pub fn random_spd(n: usize, seed: u64) -> SparseOp {
    let g = randn_mat(n, n, seed);
    let gg = g.matmul(&g.transpose()).expect("square");
    let m = DenseMat::from_fn(n, n, |i, j| {
        let (lo, hi) = (i.min(j), i.max(j));
        gg[(lo, hi)] / n as f64 + if i == j { 0.5 } else { 0.0 }
    });
    SparseOp::from_dense(&m).expect("finite")
}

/// One of the gallery matrices or a Matrix Market file.
#[derive(Clone, Debug, PartialEq)]
pub enum MatrixSpec {
    Poisson2d { g: usize },
    Poisson3d { g: usize },
    Wathen { nb: usize, seed: u64 },
    Lehmer { n: usize },
    Randn { m: usize, n: usize, seed: u64 },
    MtxFile { path: PathBuf },
}

impl MatrixSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MatrixSpec::Poisson2d { .. } => "poisson2d",
            MatrixSpec::Poisson3d { .. } => "poisson3d",
            MatrixSpec::Wathen { .. } => "wathen",
            MatrixSpec::Lehmer { .. } => "lehmer",
            MatrixSpec::Randn { .. } => "randn",
            MatrixSpec::MtxFile { .. } => "mtx-file",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = match *self {
            MatrixSpec::Poisson2d { g } | MatrixSpec::Poisson3d { g } => g == 0,
            MatrixSpec::Wathen { nb, .. } => nb == 0,
            MatrixSpec::Lehmer { n } => n == 0,
            MatrixSpec::Randn { m, n, .. } => m == 0 || n == 0,
            MatrixSpec::MtxFile { .. } => false,
        };
        if bad {
            return Err(Error::Config(format!(
                "{}: size parameters must be positive",
                self.kind()
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<SparseOp> {
        self.validate()?;
        Ok(match self {
            MatrixSpec::Poisson2d { g } => poisson2d(*g),
            MatrixSpec::Poisson3d { g } => poisson3d(*g),
            MatrixSpec::Wathen { nb, seed } => wathen(*nb, *seed),
            MatrixSpec::Lehmer { n } => lehmer_op(*n),
            MatrixSpec::Randn { m, n, seed } => randn_op(*m, *n, *seed),
            MatrixSpec::MtxFile { path } => mtx::read_matrix_market(path)?,
        })
    }
}

impl fmt::Display for MatrixSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixSpec::Poisson2d { g } => write!(f, "poisson2d(g={g})"),
            MatrixSpec::Poisson3d { g } => write!(f, "poisson3d(g={g})"),
            MatrixSpec::Wathen { nb, seed } => write!(f, "wathen(N={nb}, seed={seed})"),
            MatrixSpec::Lehmer { n } => write!(f, "lehmer(n={n})"),
            MatrixSpec::Randn { m, n, seed } => write!(f, "randn({m}x{n}, seed={seed})"),
            MatrixSpec::MtxFile { path } => write!(f, "{}", path.display()),
        }
    }
}
