use mincos_core::accel::AccelHook;
use mincos_core::gallery::{lehmer_op, poisson2d, randn_op, random_spd, wathen};
use mincos_core::linalg::{fro_norm, SparseOp};
use mincos_core::{Error, MatrixIteration, MinCos, MinCosLs, RunOptions};

fn steps<S: MatrixIteration>(s: &mut S, count: usize, mut check: impl FnMut(&S)) {
    let mut hook = AccelHook::none();
    for _ in 0..count {
        match s.step_with(&mut hook) {
            Ok(_) => check(s),
            Err(Error::Stagnation { .. }) => break,
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn spd_iterates_stay_on_sphere_with_positive_trace() {
    for seed in 0..20u64 {
        let n = 5 + (seed as usize * 7) % 46;
        let a = random_spd(n, seed);
        let ad = a.to_dense();
        let mut s = MinCos::new(&a).unwrap();
        let rn = (n as f64).sqrt();
        steps(&mut s, 100, |s| {
            let xa = s.iterate().matmul(&ad).unwrap();
            assert!((fro_norm(&xa) - rn).abs() <= 1e-10 * rn, "n {n} k {}", s.iteration());
            assert!(xa.trace() > 0.0);
        });
    }
}

#[test]
fn least_squares_iterates_stay_on_sphere() {
    for seed in 0..20u64 {
        let n = 2 + (seed as usize * 5) % 19;
        let m = n + (seed as usize * 3) % (31 - n);
        let a = randn_op(m, n, 50 + seed);
        let ad = a.to_dense();
        let mut s = MinCosLs::new(&a).unwrap();
        let rn = (n as f64).sqrt();
        steps(&mut s, 100, |s| {
            let c = ad.matmul(s.iterate()).unwrap();
            let cta = c.transpose().matmul(&ad).unwrap();
            assert!((fro_norm(&cta) - rn).abs() <= 1e-10 * rn, "{m}x{n} k {}", s.iteration());
            assert!(cta.trace() > 0.0);
            assert_eq!(s.iterate().asymmetry(), 0.0);
        });
    }
}

#[test]
fn iterates_commute_with_operator() {
    // symmetry drifts with conditioning when the iterate is not symmetrized
    for (a, sym_tol) in [(poisson2d(5), 1e-10), (random_spd(12, 3), 1e-10), (lehmer_op(10), 1e-8)] {
        let ad = a.to_dense();
        let n = a.rows();
        let mut s = MinCos::new(&a).unwrap();
        steps(&mut s, 60, |s| {
            let xa = s.iterate().matmul(&ad).unwrap();
            let ax = ad.matmul(s.iterate()).unwrap();
            assert!(fro_norm(&xa.sub(&ax).unwrap()) <= 1e-8 * (n as f64).sqrt());
            assert!(s.iterate().asymmetry() <= sym_tol, "n {n} k {}", s.iteration());
        });
    }
}

fn assert_monotone(merits: &[f64], initial: f64, what: &str) {
    let mut prev = initial;
    for (k, &m) in merits.iter().enumerate() {
        assert!(
            m <= prev + 1e-14,
            "{what}: merit rose at step {}: {prev:e} -> {m:e}",
            k + 1
        );
        prev = m;
    }
}

#[test]
fn plain_runs_are_monotone() {
    let spd: Vec<(&str, SparseOp)> = vec![
        ("poisson2d", poisson2d(6)),
        ("lehmer", lehmer_op(12)),
        ("wathen", wathen(2, 1)),
        ("random", random_spd(20, 9)),
    ];
    for (name, a) in &spd {
        let out = mincos_core::mincos::run(a, &RunOptions::new(1e-12, 400), &mut AccelHook::none()).unwrap();
        assert_monotone(&out.merits(), out.initial_merit, name);
    }
    for seed in 0..3 {
        let a = randn_op(25, 10, seed);
        let out = mincos_core::mincosls::run(&a, &RunOptions::new(1e-12, 400), &mut AccelHook::none()).unwrap();
        assert_monotone(&out.merits(), out.initial_merit, "randn");
    }
}

#[test]
fn wathen_converges() {
    let a = wathen(3, 5);
    let out = mincos_core::mincos::run(&a, &RunOptions::new(1e-8, 2000), &mut AccelHook::none()).unwrap();
    assert!(out.converged(), "final merit {:e}", out.final_merit);
}
