//! Contraction and set-valued fixed points that endogenize the continuation
//! weight: `theta*(kappa)` for the pre-commitment family, the set-valued map
//! `G` whose fixed point characterizes the sophisticated equilibrium, and the
//! per-agent value constants.

use rayon::prelude::*;

use crate::envelope;
use crate::error::{Error, Result};
use crate::market::ValidatedModel;
use crate::one_period::{self, CornerInterval};

/// Step tolerance of the fixed-point iteration.
const FP_STEP_TOL: f64 = 1e-10;
const FP_MAX_ITER: usize = 200;
/// Steps below this are dominated by quadrature noise and excluded from the
/// observed contraction-ratio statistic.
const RATIO_FLOOR: f64 = 1e-8;
/// theta*(0) within this band of zero resolves to the zero branch.
const ZERO_BAND: f64 = 1e-10;
/// Uniform scan density for the increasing-G branch.
const SCAN_POINTS: usize = 512;
/// Scan work is split into this fixed number of sequential chunks so results
/// do not depend on the worker count.
const SCAN_CHUNKS: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct ThetaStarResult {
    pub kappa: f64,
    /// The fixed point theta*(kappa) of theta -> e^{-delta tau} Phi(kappa theta).
    pub value: f64,
    pub iterations: usize,
    pub final_step: f64,
    /// Largest observed ratio of consecutive steps above the noise floor.
    pub max_step_ratio: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SolveHints {
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
}

/// Plain fixed-point iteration of `theta -> e^{-delta tau} Phi(kappa theta)`,
/// contractive with modulus at most `kappa e^{-(delta - h) tau}`.
pub fn theta_star(kappa: f64, model: &ValidatedModel, guess: f64) -> Result<ThetaStarResult> {
    theta_star_hinted(kappa, model, guess, &mut None)
}

pub(crate) fn theta_star_hinted(
    kappa: f64,
    model: &ValidatedModel,
    guess: f64,
    lambda_hint: &mut Option<f64>,
) -> Result<ThetaStarResult> {
    // the iteration contracts exactly when kappa e^{-(delta-h) tau} < 1, so
    // weights slightly above one (reached by the corner certificate at
    // xi_lower) stay solvable
    if !(kappa >= 0.0 && kappa * model.contraction_modulus < 1.0) {
        return Err(Error::Domain(format!(
            "kappa = {kappa} leaves the contractive range [0, e^((delta-h) tau))"
        )));
    }
    let edt = (-model.pref.delta * model.market.tau).exp();
    let mut theta = guess;
    let mut prev_step: Option<f64> = None;
    let mut max_ratio = 0.0f64;
    for it in 1..=FP_MAX_ITER {
        let next = edt * one_period::phi_hinted(kappa * theta, model, lambda_hint)?;
        let step = (next - theta).abs();
        if let Some(ps) = prev_step {
            if ps >= RATIO_FLOOR && step <= ps {
                max_ratio = max_ratio.max(step / ps);
            }
        }
        theta = next;
        if step <= FP_STEP_TOL {
            return Ok(ThetaStarResult {
                kappa,
                value: theta,
                iterations: it,
                final_step: step,
                max_step_ratio: max_ratio,
            });
        }
        prev_step = Some(step);
    }
    Err(Error::NonConvergent {
        what: "theta* fixed-point iteration",
        iterations: FP_MAX_ITER,
    })
}

/// `kappa(xi) = beta / (1 - (1-beta) e^{-delta tau} xi)`, the effective
/// weight the sophisticated agent puts on the continuation value when the
/// future selves' alpha-moment is `xi`.
pub fn kappa_of_xi(xi: f64, model: &ValidatedModel) -> f64 {
    let beta = model.pref.beta;
    let edt = (-model.pref.delta * model.market.tau).exp();
    beta / (1.0 - (1.0 - beta) * edt * xi)
}

/// `Theta(xi) = kappa(xi) theta*(kappa(xi))`, the endogenized continuation
/// weight at moment level `xi`.
pub fn theta_of_xi(xi: f64, model: &ValidatedModel) -> Result<f64> {
    let mut hints = SolveHints::default();
    Ok(eval_g(xi, model, &mut hints)?.theta_hat)
}

/// One evaluation of the set-valued map pipeline at `xi`.
struct GEval {
    g: f64,
    theta_star: f64,
    kappa: f64,
    theta_hat: f64,
}

fn eval_g(xi: f64, model: &ValidatedModel, hints: &mut SolveHints) -> Result<GEval> {
    let kappa = kappa_of_xi(xi, model);
    let guess = hints.theta.unwrap_or(0.0);
    let ts = theta_star_hinted(kappa, model, guess, &mut hints.lambda)?;
    hints.theta = Some(ts.value);
    let theta_hat = kappa * ts.value;
    let g = one_period::h_hinted(theta_hat, model, &mut hints.lambda)?;
    Ok(GEval {
        g,
        theta_star: ts.value,
        kappa,
        theta_hat,
    })
}

/// Value of the set-valued map `G` at `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GValue {
    Singleton(f64),
    /// The whole interval `[0, h_bar]`, returned when the endogenized weight
    /// sits exactly at the corner.
    CornerInterval { h_bar: f64 },
}

/// `G(xi) = H(Theta(xi))`: singleton except at the corner.
pub fn g_map(xi: f64, model: &ValidatedModel) -> Result<GValue> {
    let mut hints = SolveHints::default();
    let ev = eval_g(xi, model, &mut hints)?;
    let tl = envelope::theta_lower(&model.pref);
    // the endogenized weight resolves the corner to solver precision only
    if model.pref.k > 0.0 && (ev.theta_hat - tl).abs() <= 1e-9 * tl.abs().max(1.0) {
        let corner = one_period::h_interval_at_corner(model)?;
        return Ok(GValue::CornerInterval { h_bar: corner.h_bar });
    }
    Ok(GValue::Singleton(ev.g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GBranch {
    /// theta*(0) < 0: G non-increasing, unique fixed point by bisection.
    UniqueNegA,
    /// theta*(0) = 0: the myopic constant is the unique fixed point.
    UniqueZeroA,
    /// theta*(0) > 0: dense scan plus bisection; smallest crossing is
    /// canonical and all crossings are reported.
    ScanPosA,
    /// The bisection landed on the corner jump: the fixed point is xi_lower
    /// and the equilibrium law is a digital mix.
    CornerDigital,
}

impl GBranch {
    pub fn name(&self) -> &'static str {
        match self {
            GBranch::UniqueNegA => "unique_neg_a",
            GBranch::UniqueZeroA => "unique_zero_a",
            GBranch::ScanPosA => "scan_pos_a",
            GBranch::CornerDigital => "corner_digital",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GFixedPointResult {
    pub xi_hat: f64,
    pub branch: GBranch,
    /// `|g(xi_hat) - xi_hat|` for singleton branches; the corner-membership
    /// defect `|Theta(xi_hat) - theta_lower|` for the corner branch.
    pub residual: f64,
    /// Every crossing detected by the scan (singleton branches report one).
    pub fixed_points: Vec<f64>,
    pub kappa_hat: f64,
    /// `theta*(kappa_hat)`, the sophisticated value coefficient.
    pub a_hat: f64,
    /// `Theta(xi_hat) = kappa_hat * a_hat`, the sophisticated continuation
    /// weight.
    pub theta_hat: f64,
}

/// Solves `xi in G(xi)` with the default deterministic initialization.
pub fn solve_g_fixed_point(model: &ValidatedModel) -> Result<GFixedPointResult> {
    solve_g_fixed_point_seeded(model, 0)
}

/// As [`solve_g_fixed_point`], varying the internal initialization (fixed-
/// point guesses and bisection split ratios). Any variant converges to the
/// same fixed point within tolerances; the parameter exists to exercise the
/// equilibrium-uniqueness property.
pub fn solve_g_fixed_point_seeded(model: &ValidatedModel, variant: u64) -> Result<GFixedPointResult> {
    let split = [0.5, 0.45, 0.55, 0.381_966, 0.618_034][(variant % 5) as usize];
    let guess0 = [0.0, -0.5, 0.25, -1.0, 1.0][(variant % 5) as usize];

    let mut hints = SolveHints {
        theta: Some(guess0),
        lambda: None,
    };
    let a_my = theta_star_hinted(0.0, model, guess0, &mut hints.lambda)?.value;

    if a_my.abs() <= ZERO_BAND {
        log::warn!(
            "theta*(0) = {a_my:e} is inside the zero band; resolving to the zero branch"
        );
        let xi_hat = one_period::h_hinted(0.0, model, &mut hints.lambda)?;
        let ev = eval_g(xi_hat, model, &mut hints)?;
        return Ok(GFixedPointResult {
            xi_hat,
            branch: GBranch::UniqueZeroA,
            residual: (ev.g - xi_hat).abs(),
            fixed_points: vec![xi_hat],
            kappa_hat: ev.kappa,
            a_hat: ev.theta_star,
            theta_hat: ev.theta_hat,
        });
    }

    if a_my < 0.0 {
        return solve_decreasing_branch(model, split, hints);
    }
    solve_scan_branch(model, split, hints)
}

/// theta*(0) < 0: `g(xi) - xi` is strictly decreasing (with at most one
/// downward jump at the corner), so bisect on its sign.
fn solve_decreasing_branch(
    model: &ValidatedModel,
    split: f64,
    mut hints: SolveHints,
) -> Result<GFixedPointResult> {
    let e_h_tau = model.e_h_tau;
    let tl = envelope::theta_lower(&model.pref);
    let ev0 = eval_g(0.0, model, &mut hints)?;
    if ev0.g <= 0.0 {
        // G is identically {0}: xi_lower < 0
        return Ok(GFixedPointResult {
            xi_hat: 0.0,
            branch: GBranch::UniqueNegA,
            residual: ev0.g.abs(),
            fixed_points: vec![0.0],
            kappa_hat: ev0.kappa,
            a_hat: ev0.theta_star,
            theta_hat: ev0.theta_hat,
        });
    }
    let mut lo = 0.0;
    let mut hi = e_h_tau;
    let ev_hi = eval_g(hi, model, &mut hints)?;
    if ev_hi.g >= hi {
        return Ok(GFixedPointResult {
            xi_hat: hi,
            branch: GBranch::UniqueNegA,
            residual: (ev_hi.g - hi).abs(),
            fixed_points: vec![hi],
            kappa_hat: ev_hi.kappa,
            a_hat: ev_hi.theta_star,
            theta_hat: ev_hi.theta_hat,
        });
    }
    for _ in 0..200 {
        let mid = lo + (hi - lo) * split;
        let ev = eval_g(mid, model, &mut hints)?;
        if ev.g > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * e_h_tau.max(1.0) {
            break;
        }
    }
    let xi_hat = 0.5 * (lo + hi);
    let ev = eval_g(xi_hat, model, &mut hints)?;
    let residual = (ev.g - xi_hat).abs();
    if residual <= 1e-8 {
        return Ok(GFixedPointResult {
            xi_hat,
            branch: GBranch::UniqueNegA,
            residual,
            fixed_points: vec![xi_hat],
            kappa_hat: ev.kappa,
            a_hat: ev.theta_star,
            theta_hat: ev.theta_hat,
        });
    }
    // The bisection landed on the corner jump: certify by the endogenized
    // weight hitting the lower threshold, and clip xi_lower into the corner
    // interval.
    let corner = one_period::h_interval_at_corner(model)?;
    let xl = xi_lower(model)?;
    let xi_hat = xl.clamp(0.0, corner.h_bar);
    let ev = eval_g(xi_hat, model, &mut hints)?;
    let defect = (ev.theta_hat - tl).abs();
    if defect > 1e-8 {
        return Err(Error::ToleranceViolation {
            equation: "corner certificate Theta(xi_lower) = theta_lower".into(),
            residual: defect,
            limit: 1e-8,
        });
    }
    Ok(GFixedPointResult {
        xi_hat,
        branch: GBranch::CornerDigital,
        residual: defect,
        fixed_points: vec![xi_hat],
        kappa_hat: ev.kappa,
        a_hat: ev.theta_star,
        theta_hat: ev.theta_hat,
    })
}

/// theta*(0) > 0: G is continuous, increasing and strictly positive. Scan
/// `g(xi) - xi` on a fixed uniform grid, refine every sign change, report
/// all crossings, and designate the smallest as canonical.
fn solve_scan_branch(
    model: &ValidatedModel,
    split: f64,
    hints0: SolveHints,
) -> Result<GFixedPointResult> {
    let e_h_tau = model.e_h_tau;
    let n = SCAN_POINTS;
    let chunk = n / SCAN_CHUNKS;
    let xs: Vec<f64> = (0..n).map(|i| e_h_tau * i as f64 / (n - 1) as f64).collect();
    let diffs: Vec<(f64, f64)> = (0..SCAN_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut hints = hints0;
            let mut out = Vec::with_capacity(chunk);
            for &x in &xs[c * chunk..((c + 1) * chunk).min(n)] {
                let ev = eval_g(x, model, &mut hints)?;
                out.push((x, ev.g - x));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut crossings = Vec::new();
    let mut hints = hints0;
    for w in diffs.windows(2) {
        let ((x0, d0), (x1, d1)) = (w[0], w[1]);
        if d0 == 0.0 {
            crossings.push(x0);
            continue;
        }
        if d0 > 0.0 && d1 <= 0.0 || d0 < 0.0 && d1 >= 0.0 {
            let (mut lo, mut hi, positive_at_lo) = (x0, x1, d0 > 0.0);
            for _ in 0..200 {
                let mid = lo + (hi - lo) * split;
                let ev = eval_g(mid, model, &mut hints)?;
                if (ev.g > mid) == positive_at_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-12 * e_h_tau.max(1.0) {
                    break;
                }
            }
            crossings.push(0.5 * (lo + hi));
        }
    }
    if let Some((x, d)) = diffs.last() {
        if *d == 0.0 {
            crossings.push(*x);
        }
    }
    let Some(&xi_hat) = crossings.first() else {
        return Err(Error::NonConvergent {
            what: "fixed-point scan of G",
            iterations: SCAN_POINTS,
        });
    };
    if crossings.len() > 1 {
        log::warn!(
            "G has {} fixed points; reporting the smallest as canonical",
            crossings.len()
        );
    }
    let ev = eval_g(xi_hat, model, &mut hints)?;
    Ok(GFixedPointResult {
        xi_hat,
        branch: GBranch::ScanPosA,
        residual: (ev.g - xi_hat).abs(),
        fixed_points: crossings,
        kappa_hat: ev.kappa,
        a_hat: ev.theta_star,
        theta_hat: ev.theta_hat,
    })
}

/// Closed-form `xi_lower`, the moment level at which the endogenized weight
/// hits the lower threshold (only meaningful when `theta*(0) < 0`).
pub fn xi_lower(model: &ValidatedModel) -> Result<f64> {
    let pref = model.pref;
    if pref.beta >= 1.0 {
        return Err(Error::Domain(
            "xi_lower is undefined at beta = 1 (G does not depend on xi)".into(),
        ));
    }
    let edt = (-pref.delta * model.market.tau).exp();
    let denom = (1.0 + pref.k.powf(-1.0 / (1.0 - pref.alpha))).powf(1.0 - pref.alpha);
    Ok((1.0 - pref.beta * pref.gamma.powf(pref.alpha) * edt / denom) / ((1.0 - pref.beta) * edt))
}

/// Digital-law descriptor of the corner equilibrium mix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitalMix {
    pub payout: f64,
    pub threshold_eta: f64,
    pub prob_payout: f64,
}

/// All value coefficients plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct AgentConstants {
    /// Present-bias factor the constants were solved under.
    pub beta: f64,
    /// Myopic value coefficient `theta*(0)`.
    pub a_my: f64,
    /// Exponential-discounting coefficient `theta*(1)`.
    pub a_exp: f64,
    /// Pre-commitment first-period coefficient `e^{-delta tau} Phi(beta a_exp)`.
    pub a_pre: f64,
    /// Sophisticated continuation weight `Theta(xi_hat)`.
    pub a_so: f64,
    /// `a_so / a_exp`, defined when `a_exp != 0`.
    pub beta_hat: Option<f64>,
    pub xi_hat: f64,
    pub xi_lower: Option<f64>,
    pub h_lower_bar: Option<f64>,
    pub theta_lower: f64,
    /// Digital equilibrium mix when the sophisticated branch is the corner.
    pub corner_mix: Option<DigitalMix>,
    pub my_solve: ThetaStarResult,
    pub exp_solve: ThetaStarResult,
    pub g_solve: GFixedPointResult,
}

/// Solves every agent-level constant for a validated model.
pub fn agent_constants(model: &ValidatedModel) -> Result<AgentConstants> {
    let mut lambda = None;
    let my_solve = theta_star_hinted(0.0, model, 0.0, &mut lambda)?;
    let exp_solve = theta_star_hinted(1.0, model, my_solve.value, &mut lambda)?;
    let a_my = my_solve.value;
    let a_exp = exp_solve.value;
    let edt = (-model.pref.delta * model.market.tau).exp();
    let a_pre = edt * one_period::phi_hinted(model.pref.beta * a_exp, model, &mut lambda)?;
    let g_solve = solve_g_fixed_point(model)?;
    let a_so = g_solve.theta_hat;
    let beta_hat = (a_exp.abs() > 1e-12).then(|| a_so / a_exp);
    let corner = one_period::h_interval_at_corner(model).ok();
    let xl = if a_my < 0.0 && model.pref.beta < 1.0 {
        Some(xi_lower(model)?)
    } else {
        None
    };
    let corner_mix = if g_solve.branch == GBranch::CornerDigital {
        let c: &CornerInterval = corner
            .as_ref()
            .expect("corner branch requires the corner interval");
        let prob = g_solve.xi_hat / c.payout.powf(model.pref.alpha);
        let law = one_period::digital_law(g_solve.xi_hat, model)?;
        let one_period::PayoffLaw::Digital { threshold_eta, .. } = law else {
            unreachable!()
        };
        Some(DigitalMix {
            payout: c.payout,
            threshold_eta,
            prob_payout: prob,
        })
    } else {
        None
    };
    Ok(AgentConstants {
        beta: model.pref.beta,
        a_my,
        a_exp,
        a_pre,
        a_so,
        beta_hat,
        xi_hat: g_solve.xi_hat,
        xi_lower: xl,
        h_lower_bar: corner.map(|c| c.h_bar),
        theta_lower: envelope::theta_lower(&model.pref),
        corner_mix,
        my_solve,
        exp_solve,
        g_solve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{validate, MarketParams, PreferenceParams};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn model_beta(gamma: f64, beta: f64) -> ValidatedModel {
        validate(
            MarketParams {
                mu: 0.1,
                sigma: 0.15,
                r: 0.01,
                tau: 1.0,
            },
            PreferenceParams {
                alpha: 0.5,
                k: 1.25,
                gamma,
                delta: 0.3,
                beta,
            },
        )
        .unwrap()
    }

    fn model(gamma: f64) -> ValidatedModel {
        model_beta(gamma, 0.4)
    }

    /// gamma = 4, delta = 0.2: theta*(1) sits below the lower threshold, so
    /// the corner machinery activates for suitable beta.
    fn deep_model(beta: f64) -> ValidatedModel {
        validate(
            MarketParams {
                mu: 0.1,
                sigma: 0.15,
                r: 0.01,
                tau: 1.0,
            },
            PreferenceParams {
                alpha: 0.5,
                k: 1.25,
                gamma: 4.0,
                delta: 0.2,
                beta,
            },
        )
        .unwrap()
    }

    #[test]
    fn kappa_zero_converges_immediately() {
        let m = model(1.0);
        let r = theta_star(0.0, &m, 3.0).unwrap();
        assert!(r.iterations <= 2);
        let edt = (-0.3f64).exp();
        let expected = edt * one_period::phi(0.0, &m).unwrap();
        assert_abs_diff_eq!(r.value, expected, epsilon = 1e-12);
    }

    // Reference values from an independent implementation.
    #[test]
    fn theta_star_reference_values() {
        let m1 = model(1.0);
        let cases1 = [
            (0.0, 0.3667997896806401),
            (0.25, 0.463503021033025),
            (0.5, 0.6320272746085515),
            (0.75, 1.00509667920993),
            (1.0, 2.670360380299833),
        ];
        for (kappa, want) in cases1 {
            let r = theta_star(kappa, &m1, 0.0).unwrap();
            assert_relative_eq!(r.value, want, max_relative = 1e-7);
        }
        let m2 = model(2.5);
        let cases2 = [
            (0.0, -0.2961546349978052),
            (0.5, -0.47212774686797904),
            (1.0, -1.1261408948473375),
        ];
        for (kappa, want) in cases2 {
            let r = theta_star(kappa, &m2, 0.0).unwrap();
            assert_relative_eq!(r.value, want, max_relative = 1e-7);
        }
    }

    #[test]
    fn theta_star_defect_and_ratio() {
        let edt = (-0.3f64).exp();
        for gamma in [1.0, 2.5] {
            let m = model(gamma);
            let mut guess = 0.0;
            for kappa in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let r = theta_star(kappa, &m, guess).unwrap();
                guess = r.value;
                let defect =
                    (r.value - edt * one_period::phi(kappa * r.value, &m).unwrap()).abs();
                assert!(defect <= 1e-9, "defect {defect} at kappa={kappa}");
                assert!(
                    r.max_step_ratio <= m.contraction_modulus + 1e-6,
                    "ratio {} at kappa={kappa} gamma={gamma}",
                    r.max_step_ratio
                );
            }
        }
    }

    #[test]
    fn theta_star_sign_and_monotonicity_patterns() {
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let m1 = model(1.0);
        let mut prev = f64::NEG_INFINITY;
        for &k in &grid {
            let v = theta_star(k, &m1, 0.0).unwrap().value;
            assert!(v > 0.0);
            assert!(v > prev, "not strictly increasing at kappa={k}");
            prev = v;
        }
        let m2 = model(2.5);
        let mut prev = f64::INFINITY;
        for &k in &grid {
            let v = theta_star(k, &m2, 0.0).unwrap().value;
            assert!(v < 0.0);
            assert!(v < prev, "not strictly decreasing at kappa={k}");
            prev = v;
        }
    }

    #[test]
    fn theta_kappa_inequality_holds_on_pairs() {
        let edt = (-0.3f64).exp();
        for gamma in [1.0, 2.5] {
            let m = model(gamma);
            let kappas = [0.0, 0.25, 0.5, 0.75, 1.0];
            let sols: Vec<ThetaStarResult> = kappas
                .iter()
                .map(|&k| theta_star(k, &m, 0.0).unwrap())
                .collect();
            for s2 in &sols {
                let h2 = one_period::h_of_theta(s2.kappa * s2.value, &m).unwrap();
                for s1 in &sols {
                    let num = 1.0 - s1.kappa * edt * h2;
                    let den = 1.0 - s2.kappa * edt * h2;
                    assert!(
                        s2.value <= num / den * s1.value + 1e-8,
                        "inequality fails for kappa1={} kappa2={} gamma={gamma}",
                        s1.kappa,
                        s2.kappa
                    );
                }
            }
        }
    }

    #[test]
    fn g_map_degenerate_betas() {
        // beta = 1: G constant at H(theta*(1))
        let m = model_beta(1.0, 1.0);
        let a_exp = theta_star(1.0, &m, 0.0).unwrap().value;
        let want = one_period::h_of_theta(a_exp, &m).unwrap();
        for xi in [0.0, 0.6, 1.2] {
            let GValue::Singleton(g) = g_map(xi, &m).unwrap() else {
                panic!()
            };
            assert_abs_diff_eq!(g, want, epsilon = 1e-9);
        }
        // beta = 0: G constant at H(0)
        let m = model_beta(1.0, 0.0);
        let want = one_period::h_of_theta(0.0, &m).unwrap();
        for xi in [0.0, 1.0] {
            let GValue::Singleton(g) = g_map(xi, &m).unwrap() else {
                panic!()
            };
            assert_abs_diff_eq!(g, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn solve_g_beta_one_degenerates_to_exponential() {
        let m = model_beta(1.0, 1.0);
        let r = solve_g_fixed_point(&m).unwrap();
        let a_exp = theta_star(1.0, &m, 0.0).unwrap().value;
        assert_abs_diff_eq!(r.theta_hat, a_exp, epsilon = 1e-8);
        let want = one_period::h_of_theta(a_exp, &m).unwrap();
        assert_abs_diff_eq!(r.xi_hat, want, epsilon = 1e-7);
    }

    #[test]
    fn solve_g_reference_values() {
        let m1 = model(1.0);
        let r1 = solve_g_fixed_point(&m1).unwrap();
        assert_eq!(r1.branch, GBranch::ScanPosA);
        assert_relative_eq!(r1.xi_hat, 1.163604079278862, max_relative = 1e-6);
        assert_relative_eq!(r1.theta_hat, 1.02816394867864, max_relative = 1e-6);
        assert!(r1.residual <= 1e-8);

        let m2 = model(2.5);
        let r2 = solve_g_fixed_point(&m2).unwrap();
        assert_eq!(r2.branch, GBranch::UniqueNegA);
        assert_relative_eq!(r2.xi_hat, 0.9990574482256351, max_relative = 1e-6);
        assert_relative_eq!(r2.theta_hat, -0.4584217607811786, max_relative = 1e-6);
        assert!(r2.residual <= 1e-8);
    }

    #[test]
    fn seeded_solves_agree() {
        let m = model(2.5);
        let base = solve_g_fixed_point_seeded(&m, 0).unwrap();
        for v in 1..5 {
            let r = solve_g_fixed_point_seeded(&m, v).unwrap();
            assert!(
                (r.xi_hat - base.xi_hat).abs() <= 1e-7,
                "variant {v} disagrees: {} vs {}",
                r.xi_hat,
                base.xi_hat
            );
        }
    }

    /// For theta*(0) < 0 an independent dense scan of g(xi) - xi locates the
    /// same fixed point as the bisection.
    #[test]
    fn dense_scan_agrees_with_bisection_when_a_my_negative() {
        let m = model(2.5);
        let bisected = solve_g_fixed_point(&m).unwrap();
        let n = 64;
        let mut hints = SolveHints::default();
        let mut prev: Option<(f64, f64)> = None;
        let mut scanned = None;
        for i in 0..=n {
            let xi = m.e_h_tau * i as f64 / n as f64;
            let d = eval_g(xi, &m, &mut hints).unwrap().g - xi;
            if let Some((x0, d0)) = prev {
                if d0 >= 0.0 && d < 0.0 {
                    let (mut lo, mut hi) = (x0, xi);
                    for _ in 0..40 {
                        let mid = 0.5 * (lo + hi);
                        let dm = eval_g(mid, &m, &mut hints).unwrap().g - mid;
                        if dm > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    scanned = Some(0.5 * (lo + hi));
                    break;
                }
            }
            prev = Some((xi, d));
        }
        let scanned = scanned.expect("scan found no crossing");
        assert!(
            (scanned - bisected.xi_hat).abs() <= 1e-7,
            "scan {scanned} vs bisection {}",
            bisected.xi_hat
        );
    }

    #[test]
    fn xi_lower_closed_form_and_corner_certificate() {
        let m = model(2.5);
        let xl = xi_lower(&m).unwrap();
        assert_relative_eq!(xl, 1.426656682085347, max_relative = 1e-12);
        // Theta(xi_lower) = theta_lower
        let th = theta_of_xi(xl, &m).unwrap();
        assert_abs_diff_eq!(th, envelope::theta_lower(&m.pref), epsilon = 1e-8);
        // undefined at beta = 1
        assert!(xi_lower(&model_beta(2.5, 1.0)).is_err());
    }

    #[test]
    fn g_vanishes_above_xi_lower_when_a_my_negative() {
        let m = deep_model(0.5);
        let xl = xi_lower(&m).unwrap();
        assert!(xl > 0.0 && xl < m.e_h_tau, "xi_lower = {xl}");
        for xi in [xl + 0.05 * (m.e_h_tau - xl), m.e_h_tau] {
            let GValue::Singleton(g) = g_map(xi, &m).unwrap() else {
                panic!()
            };
            assert_abs_diff_eq!(g, 0.0, epsilon = 1e-12);
        }
        // negative xi_lower collapses G to {0} everywhere
        let m = deep_model(0.8);
        assert!(xi_lower(&m).unwrap() < 0.0);
        for xi in [0.0, 0.5 * m.e_h_tau, m.e_h_tau] {
            let GValue::Singleton(g) = g_map(xi, &m).unwrap() else {
                panic!()
            };
            assert_abs_diff_eq!(g, 0.0, epsilon = 1e-12);
        }
        let r = solve_g_fixed_point(&m).unwrap();
        assert_eq!(r.branch, GBranch::UniqueNegA);
        assert_eq!(r.xi_hat, 0.0);
    }

    /// theta*(1) < theta_lower: strictly decreasing up to the crossing
    /// weight, flat at -k gamma^alpha e^{-delta tau} beyond it.
    #[test]
    fn theta_star_flat_regime() {
        let m = deep_model(0.5);
        let tl = envelope::theta_lower(&m.pref);
        let flat = -m.pref.k * m.pref.gamma.powf(m.pref.alpha) * (-m.pref.delta).exp();
        let exp_sol = theta_star(1.0, &m, 0.0).unwrap();
        assert!(exp_sol.value < tl);
        assert_abs_diff_eq!(exp_sol.value, flat, epsilon = 1e-9);
        // kappa_low solves kappa * flat = theta_lower
        let kappa_low = tl / flat;
        assert!((0.0..1.0).contains(&kappa_low));
        for kappa in [kappa_low + 0.02, 0.9, 1.0] {
            let v = theta_star(kappa, &m, 0.0).unwrap().value;
            assert_abs_diff_eq!(v, flat, epsilon = 1e-9);
        }
        let mut prev = f64::INFINITY;
        for i in 0..=6 {
            let kappa = kappa_low * i as f64 / 7.0;
            let v = theta_star(kappa, &m, 0.0).unwrap().value;
            assert!(v < prev, "not strictly decreasing below kappa_low");
            prev = v;
        }
    }

    /// xi_lower inside [0, H_bar] with g above the diagonal up to it: the
    /// equilibrium is the corner digital mix.
    #[test]
    fn corner_digital_equilibrium() {
        let m = deep_model(0.7);
        let xl = xi_lower(&m).unwrap();
        let corner = one_period::h_interval_at_corner(&m).unwrap();
        assert!(xl > 0.0 && xl < corner.h_bar);
        let r = solve_g_fixed_point(&m).unwrap();
        assert_eq!(r.branch, GBranch::CornerDigital);
        assert_abs_diff_eq!(r.xi_hat, xl, epsilon = 1e-10);
        assert!(r.residual <= 1e-8);
        assert_abs_diff_eq!(r.theta_hat, envelope::theta_lower(&m.pref), epsilon = 1e-8);
        let c = agent_constants(&m).unwrap();
        let mix = c.corner_mix.expect("corner equilibrium carries the digital mix");
        assert_abs_diff_eq!(
            mix.prob_payout,
            xl / corner.payout.powf(m.pref.alpha),
            epsilon = 1e-10
        );
        assert!(mix.threshold_eta < corner.eta_star);
        // querying G exactly at the jump returns the whole corner interval
        match g_map(xl, &m).unwrap() {
            GValue::CornerInterval { h_bar } => {
                assert_abs_diff_eq!(h_bar, corner.h_bar, epsilon = 1e-12)
            }
            GValue::Singleton(v) => panic!("expected the corner interval, got {v}"),
        }
        // orderings still hold in the corner regime
        assert!(c.a_exp < c.a_so && c.a_so <= c.beta * c.a_exp + 1e-10);
        // seeded re-solves agree on the corner too
        for v in 1..5 {
            let rv = solve_g_fixed_point_seeded(&m, v).unwrap();
            assert_eq!(rv.branch, GBranch::CornerDigital);
            assert_abs_diff_eq!(rv.xi_hat, r.xi_hat, epsilon = 1e-9);
        }
    }

    /// A benchmark level tuned so theta*(0) sits inside the zero band takes
    /// the closed-form myopic branch.
    #[test]
    fn zero_branch_resolution() {
        // bisect gamma on the sign of theta*(0)
        let mut lo = 1.0;
        let mut hi = 2.5;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let v = theta_star(0.0, &model(mid), 0.0).unwrap().value;
            if v > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let gamma0 = 0.5 * (lo + hi);
        let m = model(gamma0);
        let a_my = theta_star(0.0, &m, 0.0).unwrap().value;
        assert!(a_my.abs() <= 1e-10, "bisection left a_my = {a_my:e}");
        let r = solve_g_fixed_point(&m).unwrap();
        assert_eq!(r.branch, GBranch::UniqueZeroA);
        let h0 = one_period::h_of_theta(0.0, &m).unwrap();
        assert_abs_diff_eq!(r.xi_hat, h0, epsilon = 1e-9);
        // all value coefficients collapse to zero together
        let c = agent_constants(&m).unwrap();
        assert!(c.a_exp.abs() <= 1e-9 && c.a_so.abs() <= 1e-9 && c.a_pre.abs() <= 1e-9);
    }

    #[test]
    fn agent_constants_orderings() {
        let m1 = model(1.0);
        let c1 = agent_constants(&m1).unwrap();
        assert!(c1.a_my > 0.0);
        assert!(0.0 < c1.a_so);
        assert!(c1.a_so < 0.4 * c1.a_exp);
        assert!(0.4 * c1.a_exp < c1.a_exp);
        let bh = c1.beta_hat.unwrap();
        assert!(bh > 0.0 && bh < 0.4);
        assert_relative_eq!(c1.a_pre, 1.2754400280073803, max_relative = 1e-7);

        let m2 = model(2.5);
        let c2 = agent_constants(&m2).unwrap();
        assert!(c2.a_my < 0.0);
        assert!(c2.a_exp < c2.a_so);
        assert!(c2.a_so <= 0.4 * c2.a_exp + 1e-10);
        assert!(0.4 * c2.a_exp < 0.0);
        let bh = c2.beta_hat.unwrap();
        assert!((0.4..1.0).contains(&bh));
        assert!(c2.xi_lower.is_some());
        assert!(c2.h_lower_bar.is_some());
        assert_relative_eq!(c2.a_pre, -0.631227821684911, max_relative = 1e-7);
    }

    #[test]
    fn agent_constants_beta_one_collapse() {
        let m = model_beta(1.0, 1.0);
        let c = agent_constants(&m).unwrap();
        assert_abs_diff_eq!(c.a_pre, c.a_exp, epsilon = 1e-8);
        assert_abs_diff_eq!(c.a_so, c.a_exp, epsilon = 1e-8);
    }
}
