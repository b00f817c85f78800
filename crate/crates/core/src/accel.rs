//! In-loop steplength accelerations.
//!
//! The base iteration proposes the exact line-search steplength; an
//! [`AccelHook`] may replace it by
//!
//! * a uniformly relaxed value `theta * alpha`, `theta ~ U(1 - eta, 1 + eta)`;
//! * a relaxed value with `theta ~ U(0, t*)`, where `t*` is the second root
//!   of `phi(t) = F(X + t alpha D) - F(X)`, which keeps the merit from
//!   increasing;
//! * the adaptive Barzilai-Borwein rule ABBmin, which alternates between the
//!   long BB1 step and the windowed minimum of short BB2 steps.
//!
//! The normalization onto the constraint sphere always runs after the
//! override, so relaxed steps never break the iterate invariants.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{degeneracy_threshold, DenseMat, DEGENERACY_FACTOR, UNIT_ROUNDOFF};
use crate::record::{Flag, StepKind};

/// Scalars shared by the optimal steplength and `t*`:
/// `w = <XA, I>`, `d_i = <DA, I>`, `xd = <XA, DA>`, `dd = ||DA||^2` and
/// `xx = ||XA||^2`, which is `n` on the sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFactors {
    pub n: usize,
    pub w: f64,
    pub d_i: f64,
    pub xd: f64,
    pub dd: f64,
    pub xx: f64,
}

impl LineFactors {
    /// Exact minimizer of `alpha -> F(X + alpha D)`. On the sphere this is
    /// `|(n d_i - w xd) / (d_i xd - w dd)|`.
    pub fn optimal_alpha(&self, k: usize) -> Result<f64> {
        let num = self.xx * self.d_i - self.w * self.xd;
        let den = self.d_i * self.xd - self.w * self.dd;
        let scale = (self.d_i * self.xd).abs() + (self.w * self.dd).abs();
        if !den.is_finite() || den.abs() <= DEGENERACY_FACTOR * UNIT_ROUNDOFF * scale || den == 0.0 {
            return Err(Error::Stagnation { k, denominator: den });
        }
        let alpha = (num / den).abs();
        if !alpha.is_finite() || alpha == 0.0 {
            return Err(Error::Stagnation { k, denominator: den });
        }
        Ok(alpha)
    }

    /// Cosine of `XA` to the identity.
    pub fn cos_x(&self) -> f64 {
        self.w / ((self.n as f64).sqrt() * self.xx.sqrt())
    }

    /// Cosine of `DA` to the identity: the limit of the line as `alpha` grows.
    pub fn cos_d(&self) -> f64 {
        self.d_i / ((self.n as f64).sqrt() * self.dd.sqrt())
    }
}

/// How a line with a vanishing steplength denominator is resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegenerateLine {
    /// `D` is parallel to `X`: moving along it only rescales.
    Radial,
    /// The merit keeps falling as `alpha` grows; the best point is `D` itself.
    AtInfinity,
    /// Neither; the step cannot be taken.
    Stuck,
}

/// Classifies a line whose optimal steplength has no finite value.
/// `xa` and `da` are the operator-applied iterate and direction.
pub fn classify_degenerate(f: &LineFactors, xa: &DenseMat, da: &DenseMat) -> DegenerateLine {
    let c = if f.xx > 0.0 { f.xd / f.xx } else { 0.0 };
    let tangent: f64 = da
        .as_slice()
        .iter()
        .zip(xa.as_slice())
        .map(|(d, x)| (d - c * x).powi(2))
        .sum::<f64>()
        .sqrt();
    if tangent <= degeneracy_threshold(f.n, f.n) * f.dd.sqrt() {
        return DegenerateLine::Radial;
    }
    let (cx, cd) = (f.cos_x(), f.cos_d());
    if cd.is_finite() && cd > cx + DEGENERACY_FACTOR * UNIT_ROUNDOFF {
        DegenerateLine::AtInfinity
    } else {
        DegenerateLine::Stuck
    }
}

/// Steplength decision for one line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LineStep {
    Finite(f64),
    /// Jump to the normalized direction.
    Infinite,
    /// No move is possible; the iterate is stationary.
    Stationary,
}

/// Optimal steplength, with the degenerate cases of [`classify_degenerate`]
/// resolved. A stuck line is reported as the stagnation error.
pub fn resolve_line(f: &LineFactors, k: usize, xa: &DenseMat, da: &DenseMat) -> Result<LineStep> {
    match f.optimal_alpha(k) {
        Ok(a) => Ok(LineStep::Finite(a)),
        Err(e @ Error::Stagnation { .. }) => match classify_degenerate(f, xa, da) {
            DegenerateLine::Radial => Ok(LineStep::Stationary),
            DegenerateLine::AtInfinity => Ok(LineStep::Infinite),
            DegenerateLine::Stuck => Err(e),
        },
        Err(e) => Err(e),
    }
}

/// Relative steplength factor `t* > 1` at which the merit returns to its
/// pre-step value, if it exists.
///
/// Solves `phi(t) = 0` for the nonzero root of
/// `(w + s d_i)^2 xx = w^2 (xx + 2 s xd + s^2 dd)` with `s = t * alpha`.
pub fn t_star(f: &LineFactors, alpha: f64) -> Option<f64> {
    let LineFactors { w, d_i, xd, dd, xx, .. } = *f;
    let num = 2.0 * (w * w * xd - xx * w * d_i);
    let den = alpha * (xx * d_i * d_i - w * w * dd);
    let scale = alpha.abs() * (xx * d_i * d_i + w * w * dd);
    if !den.is_finite() || den.abs() <= DEGENERACY_FACTOR * UNIT_ROUNDOFF * scale || den == 0.0 {
        return None;
    }
    let t = num / den;
    (t.is_finite() && t > 1.0).then_some(t)
}

/// `theta * alpha_opt` with `theta ~ U(1 - eta, 1 + eta)`.
pub fn relax_random<R: Rng + ?Sized>(alpha_opt: f64, eta: f64, rng: &mut R) -> f64 {
    if eta <= 0.0 {
        return alpha_opt;
    }
    let u: f64 = rng.random();
    (1.0 - eta + 2.0 * eta * u) * alpha_opt
}

/// `theta * alpha_opt` with `theta ~ U(0, t*)` when `t*` is known, otherwise
/// [`relax_random`].
pub fn relax_random_tstar<R: Rng + ?Sized>(alpha_opt: f64, t_star_val: Option<f64>, eta: f64, rng: &mut R) -> f64 {
    match t_star_val {
        Some(t) => {
            // U(0, t*) excluding zero so the step always moves.
            let u: f64 = rng.random();
            let theta = (1.0 - u) * t;
            theta * alpha_opt
        }
        None => relax_random(alpha_opt, eta, rng),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccelMode {
    None,
    Random,
    RandomTstar,
    Abbmin,
}

/// What the base iteration offers the hook before committing a step.
pub struct StepProposal<'a> {
    pub k: usize,
    pub alpha_opt: f64,
    pub factors: LineFactors,
    pub x: &'a DenseMat,
    pub d: &'a DenseMat,
    /// Previous iterate and direction, when the solver keeps them.
    pub prev: Option<(&'a DenseMat, &'a DenseMat)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepChoice {
    pub alpha: f64,
    pub kind: StepKind,
    pub flag: Option<Flag>,
}

impl StepChoice {
    fn optimal(alpha: f64) -> Self {
        StepChoice {
            alpha,
            kind: StepKind::Optimal,
            flag: None,
        }
    }
}

/// Per-run steplength policy. Owns its RNG state and the BB2 window.
#[derive(Clone, Debug)]
pub struct AccelHook {
    mode: AccelMode,
    eta: f64,
    tau: f64,
    window: usize,
    rng: ChaCha8Rng,
    bb2_history: VecDeque<f64>,
}

pub const DEFAULT_ETA: f64 = 0.5;
pub const DEFAULT_TAU: f64 = 0.8;
pub const DEFAULT_WINDOW: usize = 10;

impl Default for AccelHook {
    fn default() -> Self {
        Self::none()
    }
}

impl AccelHook {
    pub fn none() -> Self {
        AccelHook {
            mode: AccelMode::None,
            eta: DEFAULT_ETA,
            tau: DEFAULT_TAU,
            window: DEFAULT_WINDOW,
            rng: ChaCha8Rng::seed_from_u64(0),
            bb2_history: VecDeque::new(),
        }
    }

    /// Random relaxation with half-width `eta` in `[0, 1)`. The generator is
    /// ChaCha8 seeded through `SeedableRng::seed_from_u64`.
    pub fn random(eta: f64, seed: u64) -> Result<Self> {
        check_eta(eta)?;
        Ok(AccelHook {
            mode: AccelMode::Random,
            eta,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ..Self::none()
        })
    }

    /// Random relaxation inside the safe interval `(0, t*)`, falling back to
    /// `U(1 - eta, 1 + eta)` when `t*` does not exist.
    pub fn random_tstar(eta: f64, seed: u64) -> Result<Self> {
        Ok(AccelHook {
            mode: AccelMode::RandomTstar,
            ..Self::random(eta, seed)?
        })
    }

    pub fn abbmin(tau: f64, window: usize) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {tau}")));
        }
        if window == 0 {
            return Err(Error::Config("ABBmin window must be at least 1".into()));
        }
        Ok(AccelHook {
            mode: AccelMode::Abbmin,
            tau,
            window,
            bb2_history: VecDeque::with_capacity(window + 1),
            ..Self::none()
        })
    }

    pub fn mode(&self) -> AccelMode {
        self.mode
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Whether the solver must keep the previous iterate and direction.
    pub fn needs_history(&self) -> bool {
        self.mode == AccelMode::Abbmin
    }

    pub fn bb2_history(&self) -> &VecDeque<f64> {
        &self.bb2_history
    }

    pub fn relax_random(&mut self, alpha_opt: f64) -> f64 {
        relax_random(alpha_opt, self.eta, &mut self.rng)
    }

    pub fn relax_random_tstar(&mut self, alpha_opt: f64, t_star_val: Option<f64>) -> f64 {
        relax_random_tstar(alpha_opt, t_star_val, self.eta, &mut self.rng)
    }

    /// Picks the steplength for the proposed step.
    pub fn choose(&mut self, p: &StepProposal<'_>) -> StepChoice {
        match self.mode {
            AccelMode::None => StepChoice::optimal(p.alpha_opt),
            AccelMode::Random => StepChoice {
                alpha: self.relax_random(p.alpha_opt),
                kind: StepKind::Random,
                flag: None,
            },
            AccelMode::RandomTstar => {
                let f = p.factors;
                let t = t_star(&f, p.alpha_opt);
                StepChoice {
                    alpha: self.relax_random_tstar(p.alpha_opt, t),
                    kind: StepKind::Random,
                    flag: None,
                }
            }
            AccelMode::Abbmin => self.abbmin_alpha(p),
        }
    }

    /// ABBmin steplength from `S = X_k - X_{k-1}` and `Y = D_k - D_{k-1}`.
    ///
    /// Uses `|BB1| = ||S||^2 / |<S,Y>|` and `|BB2| = |<S,Y>| / ||Y||^2`; the
    /// ratio test `|BB2| / |BB1| < tau` is sign-free. Returns the optimal
    /// steplength when no history exists or a quotient is undefined.
    pub fn abbmin_alpha(&mut self, p: &StepProposal<'_>) -> StepChoice {
        let Some((prev_x, prev_d)) = p.prev else {
            return StepChoice::optimal(p.alpha_opt);
        };
        let fallback = StepChoice {
            alpha: p.alpha_opt,
            kind: StepKind::Fallback,
            flag: Some(Flag::BbFallback),
        };
        if prev_x.shape() != p.x.shape() || prev_d.shape() != p.d.shape() {
            return fallback;
        }

        let (mut ss, mut sy, mut yy) = (0.0, 0.0, 0.0);
        let xs = p.x.as_slice().iter().zip(prev_x.as_slice());
        let ds = p.d.as_slice().iter().zip(prev_d.as_slice());
        for ((x, px), (d, pd)) in xs.zip(ds) {
            let s = x - px;
            let y = d - pd;
            ss += s * s;
            sy += s * y;
            yy += y * y;
        }
        let (r, c) = p.x.shape();
        let thr = degeneracy_threshold(r, c);
        let sy_abs = sy.abs();
        if yy.sqrt() <= thr || ss.sqrt() <= thr || sy_abs <= DEGENERACY_FACTOR * UNIT_ROUNDOFF * (ss * yy).sqrt() {
            return fallback;
        }

        let bb1 = ss / sy_abs;
        let bb2 = sy_abs / yy;
        self.bb2_history.push_back(bb2);
        while self.bb2_history.len() > self.window + 1 {
            self.bb2_history.pop_front();
        }
        let alpha = if bb2 / bb1 < self.tau {
            self.bb2_history.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            bb1
        };
        if alpha.is_finite() && alpha > 0.0 {
            StepChoice {
                alpha,
                kind: StepKind::Abbmin,
                flag: None,
            }
        } else {
            fallback
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::Config(format!("eta must lie in [0, 1), got {eta}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn eta_zero_returns_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(relax_random(0.37, 0.0, &mut rng), 0.37);
    }

    #[test]
    fn seeded_draws_repeat() {
        let mut a = AccelHook::random(0.5, 42).unwrap();
        let mut b = AccelHook::random(0.5, 42).unwrap();
        let xs: Vec<f64> = (0..50).map(|_| a.relax_random(1.0)).collect();
        let ys: Vec<f64> = (0..50).map(|_| b.relax_random(1.0)).collect();
        assert_eq!(xs, ys);
        assert!(xs.iter().all(|t| (0.5..1.5).contains(t)));
        let mut c = AccelHook::random(0.5, 43).unwrap();
        assert_ne!(xs[0], c.relax_random(1.0));
    }

    #[test]
    fn theta_mean_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 100_000;
        let mean = (0..draws).map(|_| relax_random(1.0, 0.5, &mut rng)).sum::<f64>() / draws as f64;
        assert!((0.995..=1.005).contains(&mean), "mean {mean}");
    }

    #[test]
    fn tstar_draw_is_scaled_uniform() {
        // The draw is (1 - u) * t*, so replaying the stream gives theta.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: f64 = rng.random();
        let theta = (1.0 - u) * 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let got = relax_random_tstar(0.25, Some(2.0), 0.5, &mut rng);
        assert_eq!(got, theta * 0.25);
        assert!(theta > 0.0 && theta <= 2.0);
    }

    #[test]
    fn tstar_absent_falls_back_to_uniform_relaxation() {
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            assert_eq!(
                relax_random_tstar(0.8, None, 0.5, &mut r1),
                relax_random(0.8, 0.5, &mut r2)
            );
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(AccelHook::random(1.0, 0).is_err());
        assert!(AccelHook::random(-0.1, 0).is_err());
        assert!(AccelHook::abbmin(0.0, 10).is_err());
        assert!(AccelHook::abbmin(1.0, 10).is_err());
    }

    fn proposal<'a>(x: &'a DenseMat, d: &'a DenseMat, prev: Option<(&'a DenseMat, &'a DenseMat)>) -> StepProposal<'a> {
        StepProposal {
            k: 1,
            alpha_opt: 0.5,
            factors: LineFactors {
                n: x.rows(),
                w: 1.0,
                d_i: 0.0,
                xd: 0.0,
                dd: 0.0,
                xx: x.rows() as f64,
            },
            x,
            d,
            prev,
        }
    }

    #[test]
    fn abbmin_without_history_is_optimal() {
        let x = DenseMat::identity(2);
        let d = DenseMat::identity(2);
        let mut hook = AccelHook::abbmin(0.8, 10).unwrap();
        let c = hook.choose(&proposal(&x, &d, None));
        assert_eq!(c, StepChoice::optimal(0.5));
        assert!(hook.bb2_history().is_empty());
    }

    #[test]
    fn abbmin_degenerate_difference_falls_back() {
        let x = DenseMat::identity(2);
        let d = DenseMat::identity(2);
        let mut hook = AccelHook::abbmin(0.8, 10).unwrap();
        let c = hook.choose(&proposal(&x, &d, Some((&x, &d))));
        assert_eq!(c.kind, StepKind::Fallback);
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.flag, Some(Flag::BbFallback));
    }

    #[test]
    fn abbmin_window_is_bounded() {
        let mut hook = AccelHook::abbmin(0.8, 3).unwrap();
        let mut x_prev = DenseMat::identity(3);
        let mut d_prev = DenseMat::diag(&[0.1, 0.2, 0.3]);
        for k in 0..20 {
            let t = k as f64;
            let x = DenseMat::diag(&[1.0 + 0.1 * t, 1.0 - 0.05 * t, 1.0 + 0.02 * t * t]);
            let d = DenseMat::diag(&[0.1 + 0.3 * t.sin(), 0.2 + 0.1 * t, 0.3 - 0.07 * t.cos()]);
            let c = hook.choose(&proposal(&x, &d, Some((&x_prev, &d_prev))));
            assert!(c.alpha.is_finite() && c.alpha > 0.0);
            assert!(hook.bb2_history().len() <= 4);
            x_prev = x;
            d_prev = d;
        }
    }

    proptest! {
        // |BB2| <= |BB1| follows from Cauchy-Schwarz on <S, Y>^2.
        #[test]
        fn bb2_never_exceeds_bb1(
            s in proptest::collection::vec(-1.0f64..1.0, 9),
            y in proptest::collection::vec(-1.0f64..1.0, 9),
        ) {
            let ss: f64 = s.iter().map(|v| v * v).sum();
            let yy: f64 = y.iter().map(|v| v * v).sum();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            prop_assume!(sy.abs() > 1e-8 && yy > 1e-8);
            let bb1 = ss / sy.abs();
            let bb2 = sy.abs() / yy;
            prop_assert!(bb2 <= bb1 * (1.0 + 1e-12));

            // Same numbers through the hook: the ratio test can only pick
            // values no larger than BB1.
            let prev_x = DenseMat::zeros(3, 3);
            let prev_d = DenseMat::zeros(3, 3);
            let x = DenseMat::from_vec(3, 3, s.clone()).unwrap();
            let d = DenseMat::from_vec(3, 3, y.clone()).unwrap();
            let mut hook = AccelHook::abbmin(0.8, 10).unwrap();
            let c = hook.choose(&proposal(&x, &d, Some((&prev_x, &prev_d))));
            prop_assert_eq!(c.kind, StepKind::Abbmin);
            prop_assert!(c.alpha <= bb1 * (1.0 + 1e-12));
        }
    }
}
