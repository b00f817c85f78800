mod common;

use mincos_core::accel::AccelHook;
use mincos_core::gallery::{poisson2d, randn_op};
use mincos_core::linalg::{DenseMat, SparseOp};
use mincos_core::RunOptions;

#[test]
fn small_poisson_inverse() {
    let a = poisson2d(4);
    let out = mincos_core::mincos::run(&a, &RunOptions::new(1e-14, 2000), &mut AccelHook::none()).unwrap();
    assert!(out.converged() || out.final_merit < 1e-13);
    let inv = common::dense_inverse(&a.to_dense());
    assert!(
        common::rel_err(&out.x, &inv) < 1e-6,
        "rel err {:e}",
        common::rel_err(&out.x, &inv)
    );
}

#[test]
fn rectangular_diag_embedding_closed_form() {
    let a = SparseOp::from_triplets(4, 2, &[(0, 0, 1.0), (1, 1, 2.0)]).unwrap();
    let out = mincos_core::mincosls::run(&a, &RunOptions::new(1e-15, 100), &mut AccelHook::none()).unwrap();
    assert!(out.x.max_abs_diff(&DenseMat::diag(&[1.0, 0.25])) <= 1e-8, "{:?}", out.x);
}

#[test]
fn least_squares_inverse_of_normal_matrix() {
    let a = randn_op(30, 10, 11);
    let out = mincos_core::mincosls::run(&a, &RunOptions::new(1e-14, 3000), &mut AccelHook::none()).unwrap();
    let inv = common::dense_inverse(&common::ata(&a));
    assert!(
        common::rel_err(&out.x, &inv) < 1e-5,
        "rel err {:e}",
        common::rel_err(&out.x, &inv)
    );
}

#[test]
fn error_tracks_merit() {
    // relative error of the inverse is bounded by a conditioning multiple of sqrt(merit)
    let a = poisson2d(5);
    let inv = common::dense_inverse(&a.to_dense());
    for eps in [1e-4, 1e-6, 1e-8] {
        let out = mincos_core::mincos::run(&a, &RunOptions::new(eps, 5000), &mut AccelHook::none()).unwrap();
        let err = common::rel_err(&out.x, &inv);
        assert!(err < 50.0 * (2.0 * out.final_merit).sqrt(), "eps {eps}: err {err:e}");
    }
}
