//! One-period optimization by martingale duality: solve
//! `Phi(theta) = sup { E[F(Y; theta)] : Y >= 0, E[Z Y] <= 1 }` through the
//! concave majorant, produce the optimal gross-return law `y(z; theta)`,
//! its value, and the alpha-moment map `H(theta) = E[(Y*)^alpha]`.

use crate::envelope::{
    self, envelope_eval, envelope_geometry, inv_marginal_gain, inv_marginal_loss, EnvelopeCase,
    EnvelopeGeometry,
};
use crate::error::{Error, Result};
use crate::market::{kernel_law, KernelLaw, PreferenceParams, Tolerances, ValidatedModel};
use crate::solve;

/// Discriminant of a [`PayoffLaw`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    TwoBranch,
    GainOnly,
    Zero,
    ConstantCap,
    Digital,
}

impl LawKind {
    pub fn name(&self) -> &'static str {
        match self {
            LawKind::TwoBranch => "two_branch",
            LawKind::GainOnly => "gain_only",
            LawKind::Zero => "zero",
            LawKind::ConstantCap => "constant_cap",
            LawKind::Digital => "digital",
        }
    }
}

/// Dual-branch optimizer data shared by the two inverse-marginal laws.
#[derive(Debug, Clone)]
pub struct DualLaw {
    pub theta: f64,
    pub lambda_star: f64,
    /// Kernel breakpoint `m / lambda_star` where the payoff switches branch.
    pub threshold_z: f64,
    pub geom: EnvelopeGeometry,
    pub pref: PreferenceParams,
    tol: Tolerances,
}

/// The optimal one-period gross-return map `z -> y(z; theta)`.
#[derive(Debug, Clone)]
pub enum PayoffLaw {
    /// theta > 0: inverse gain marginal below the threshold, inverse loss
    /// marginal above it; no mass in the chord interval.
    TwoBranch(DualLaw),
    /// Mildly/moderately negative theta: inverse gain marginal below the
    /// threshold, zero above it (an atom at ruin).
    GainOnly(DualLaw),
    /// theta below the lower threshold: full stop, `Y = 0`.
    Zero { theta: f64 },
    /// The flat-cap regime: a constant payoff replicated risk-free.
    ConstantCap { theta: f64, level: f64 },
    /// Digital member of the corner optimizer family:
    /// `payout * 1{z <= threshold_eta}`.
    Digital {
        theta: f64,
        payout: f64,
        threshold_eta: f64,
    },
}

impl PayoffLaw {
    pub fn kind(&self) -> LawKind {
        match self {
            PayoffLaw::TwoBranch(_) => LawKind::TwoBranch,
            PayoffLaw::GainOnly(_) => LawKind::GainOnly,
            PayoffLaw::Zero { .. } => LawKind::Zero,
            PayoffLaw::ConstantCap { .. } => LawKind::ConstantCap,
            PayoffLaw::Digital { .. } => LawKind::Digital,
        }
    }

    pub fn theta(&self) -> f64 {
        match self {
            PayoffLaw::TwoBranch(d) | PayoffLaw::GainOnly(d) => d.theta,
            PayoffLaw::Zero { theta }
            | PayoffLaw::ConstantCap { theta, .. }
            | PayoffLaw::Digital { theta, .. } => *theta,
        }
    }

    /// The discontinuity/kink locations of `z -> y(z)`, for quadrature.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            PayoffLaw::TwoBranch(d) | PayoffLaw::GainOnly(d) => vec![d.threshold_z],
            PayoffLaw::Digital { threshold_eta, .. } => vec![*threshold_eta],
            _ => vec![],
        }
    }

    /// Pointwise payoff `y(z; theta) >= 0`.
    pub fn eval(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match self {
            PayoffLaw::TwoBranch(d) => {
                let q = d.lambda_star * z;
                let m1 = match d.geom.case {
                    EnvelopeCase::PositiveTheta { m1, .. } => m1,
                    _ => unreachable!("two-branch law always carries chord geometry"),
                };
                if q > m1 {
                    inv_marginal_loss(q, d.geom.theta.max(1e-12), &d.pref, &d.tol)
                        .expect("loss marginal is defined above the chord slope")
                } else {
                    inv_marginal_gain(q, d.theta, &d.pref, &d.tol)
                        .expect("gain marginal is defined below the chord slope")
                }
            }
            PayoffLaw::GainOnly(d) => {
                let q = d.lambda_star * z;
                let m2 = match d.geom.case {
                    EnvelopeCase::MildNegative { m2, .. }
                    | EnvelopeCase::ModerateNegative { m2, .. } => m2,
                    _ => unreachable!("gain-only law always carries origin-chord geometry"),
                };
                if q <= m2 {
                    inv_marginal_gain(q, d.theta, &d.pref, &d.tol)
                        .expect("gain marginal is defined below the origin chord slope")
                } else {
                    0.0
                }
            }
            PayoffLaw::Zero { .. } => 0.0,
            PayoffLaw::ConstantCap { level, .. } => *level,
            PayoffLaw::Digital {
                payout,
                threshold_eta,
                ..
            } => {
                if z <= *threshold_eta {
                    *payout
                } else {
                    0.0
                }
            }
        }
    }
}

/// Pointwise payoff evaluation.
pub fn payoff_eval(law: &PayoffLaw, z: f64) -> f64 {
    law.eval(z)
}

#[derive(Debug, Clone, Default)]
pub struct SolveDiagnostics {
    /// Budget-function evaluations spent locating the multiplier.
    pub lambda_evals: usize,
    /// `E[Z y(Z)] - 1` at the returned law.
    pub budget_residual: f64,
    /// Set when theta sits exactly at the lower threshold, where the whole
    /// digital family is optimal and the zero law is only a representative.
    pub corner_digital_family: bool,
    /// Set for the flat-cap regime, which endogenized continuation weights
    /// never produce.
    pub constant_cap: bool,
}

#[derive(Debug, Clone)]
pub struct OnePeriodSolution {
    pub law: PayoffLaw,
    pub phi_value: f64,
    pub h_value: f64,
    pub diagnostics: SolveDiagnostics,
}

/// E[Z y(Z)] for a law, by quadrature split at the law's breakpoints.
pub fn budget(law: &PayoffLaw, kernel: &KernelLaw) -> Result<f64> {
    kernel.expect(|z| z * law.eval(z), &law.breakpoints())
}

struct DualCore {
    law: PayoffLaw,
    kernel: KernelLaw,
    lambda_evals: usize,
}

/// Case dispatch plus the multiplier solve. Everything downstream (value,
/// moment, certificates) evaluates integrals against the returned law.
fn dual_core(
    theta: f64,
    model: &ValidatedModel,
    lambda_hint: &mut Option<f64>,
) -> Result<DualCore> {
    let pref = model.pref;
    let kernel = kernel_law(model, model.market.tau)?;
    let tl = envelope::theta_lower(&pref);

    if theta <= tl {
        return Ok(DualCore {
            law: PayoffLaw::Zero { theta },
            kernel,
            lambda_evals: 0,
        });
    }

    let geom = envelope_geometry(theta, &pref, &model.tol)?;

    if let EnvelopeCase::ModerateNegative { c4, .. } = geom.case {
        let cond = theta.abs().powf(-1.0 / (1.0 - pref.alpha));
        if cond <= 1.0 - pref.gamma * (-model.market.r * model.market.tau).exp() {
            return Ok(DualCore {
                law: PayoffLaw::ConstantCap {
                    theta,
                    level: c4 * pref.gamma,
                },
                kernel,
                lambda_evals: 0,
            });
        }
    }

    let slope = match geom.case {
        EnvelopeCase::PositiveTheta { m1, .. } => m1,
        EnvelopeCase::MildNegative { m2, .. } | EnvelopeCase::ModerateNegative { m2, .. } => m2,
        EnvelopeCase::Degenerate => unreachable!("degenerate handled above"),
    };

    let mut evals = 0usize;
    let mut zeta = |lambda: f64| -> Result<f64> {
        evals += 1;
        let law = make_dual_law(theta, lambda, slope, geom, pref, model.tol);
        budget(&law, &kernel)
    };

    // zeta is strictly decreasing and continuous; expand a geometric bracket
    // from the warm seed, then polish with Brent.
    let seed = lambda_hint.unwrap_or(1.0).max(1e-12);
    let mut lo = seed;
    let mut hi = seed;
    let mut f_lo = zeta(lo)? - 1.0;
    let mut f_hi = f_lo;
    let mut n = 0;
    while f_lo < 0.0 {
        hi = lo;
        f_hi = f_lo;
        lo *= 0.5;
        f_lo = zeta(lo)? - 1.0;
        n += 1;
        if n > 400 {
            return Err(Error::NonConvergent {
                what: "multiplier bracket",
                iterations: n,
            });
        }
    }
    while !(f_hi < 0.0 && hi > lo) {
        hi *= 2.0;
        f_hi = zeta(hi)? - 1.0;
        n += 1;
        if n > 400 {
            return Err(Error::NonConvergent {
                what: "multiplier bracket",
                iterations: n,
            });
        }
    }
    let mut inner_err = None;
    let lambda = solve::brent(
        |l| match zeta(l) {
            Ok(v) => v - 1.0,
            Err(e) => {
                inner_err = Some(e);
                f64::NAN
            }
        },
        lo,
        hi,
        f_lo,
        f_hi,
        model.tol.root_rel,
        "budget multiplier",
    )?;
    if let Some(e) = inner_err {
        return Err(e);
    }
    *lambda_hint = Some(lambda);
    Ok(DualCore {
        law: make_dual_law(theta, lambda, slope, geom, pref, model.tol),
        kernel,
        lambda_evals: evals,
    })
}

/// Solves the one-period problem at a given continuation weight.
pub fn solve_dual(theta: f64, model: &ValidatedModel) -> Result<OnePeriodSolution> {
    solve_dual_hinted(theta, model, &mut None)
}

/// As [`solve_dual`], reusing `lambda_hint` as the multiplier search seed.
/// The hint only affects iteration counts, never the result.
pub(crate) fn solve_dual_hinted(
    theta: f64,
    model: &ValidatedModel,
    lambda_hint: &mut Option<f64>,
) -> Result<OnePeriodSolution> {
    let pref = model.pref;
    let core = dual_core(theta, model, lambda_hint)?;
    let (phi_value, h_value, budget_residual, corner, cap) = match &core.law {
        PayoffLaw::Zero { .. } => {
            let floor = -pref.k * pref.gamma.powf(pref.alpha);
            let tl = envelope::theta_lower(&pref);
            (floor, 0.0, -1.0, theta == tl && pref.k > 0.0, false)
        }
        PayoffLaw::ConstantCap { level, .. } => (
            envelope::f_raw(*level, theta, &pref),
            level.powf(pref.alpha),
            level * core.kernel.mean() - 1.0,
            false,
            true,
        ),
        law => {
            let breaks = law.breakpoints();
            let phi_value =
                core.kernel
                    .expect(|z| envelope::f_raw(law.eval(z), theta, &pref), &breaks)?;
            let h_value = core
                .kernel
                .expect(|z| law.eval(z).powf(pref.alpha), &breaks)?;
            let residual = budget(law, &core.kernel)? - 1.0;
            if residual.abs() > 1e-8 {
                return Err(Error::ToleranceViolation {
                    equation: "one-period budget E[Z y(Z)] = 1".into(),
                    residual: residual.abs(),
                    limit: 1e-8,
                });
            }
            (phi_value, h_value, residual, false, false)
        }
    };
    Ok(OnePeriodSolution {
        law: core.law,
        phi_value,
        h_value,
        diagnostics: SolveDiagnostics {
            lambda_evals: core.lambda_evals,
            budget_residual,
            corner_digital_family: corner,
            constant_cap: cap,
        },
    })
}

/// Phi only, skipping the moment and certificate integrals (used inside
/// fixed-point iterations).
pub(crate) fn phi_hinted(
    theta: f64,
    model: &ValidatedModel,
    lambda_hint: &mut Option<f64>,
) -> Result<f64> {
    let pref = model.pref;
    let core = dual_core(theta, model, lambda_hint)?;
    match &core.law {
        PayoffLaw::Zero { .. } => Ok(-pref.k * pref.gamma.powf(pref.alpha)),
        PayoffLaw::ConstantCap { level, .. } => Ok(envelope::f_raw(*level, theta, &pref)),
        law => core
            .kernel
            .expect(|z| envelope::f_raw(law.eval(z), theta, &pref), &law.breakpoints()),
    }
}

/// H only (the alpha-moment of the optimizer).
pub(crate) fn h_hinted(
    theta: f64,
    model: &ValidatedModel,
    lambda_hint: &mut Option<f64>,
) -> Result<f64> {
    let pref = model.pref;
    let core = dual_core(theta, model, lambda_hint)?;
    match &core.law {
        PayoffLaw::Zero { .. } => Ok(0.0),
        PayoffLaw::ConstantCap { level, .. } => Ok(level.powf(pref.alpha)),
        law => core
            .kernel
            .expect(|z| law.eval(z).powf(pref.alpha), &law.breakpoints()),
    }
}

fn make_dual_law(
    theta: f64,
    lambda: f64,
    slope: f64,
    geom: EnvelopeGeometry,
    pref: PreferenceParams,
    tol: Tolerances,
) -> PayoffLaw {
    let dual = DualLaw {
        theta,
        lambda_star: lambda,
        threshold_z: slope / lambda,
        geom,
        pref,
        tol,
    };
    if matches!(geom.case, EnvelopeCase::PositiveTheta { .. }) {
        PayoffLaw::TwoBranch(dual)
    } else {
        PayoffLaw::GainOnly(dual)
    }
}

/// Phi(theta), the optimal one-period value.
pub fn phi(theta: f64, model: &ValidatedModel) -> Result<f64> {
    Ok(solve_dual(theta, model)?.phi_value)
}

/// H(theta) = E[(Y*)^alpha] for theta away from the corner.
pub fn h_of_theta(theta: f64, model: &ValidatedModel) -> Result<f64> {
    let tl = envelope::theta_lower(&model.pref);
    if theta == tl && model.pref.k > 0.0 {
        return Err(Error::CornerCase);
    }
    Ok(solve_dual(theta, model)?.h_value)
}

/// The corner interval `H(theta_lower) = [0, h_bar]` and its binding digital
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerInterval {
    /// Threshold at which the digital family exhausts the budget.
    pub eta_star: f64,
    /// Upper endpoint of the corner alpha-moment interval.
    pub h_bar: f64,
    /// Common payout of the digital family.
    pub payout: f64,
}

/// Computes the corner interval when `gamma > e^{r tau}` and `k > 0`.
/// `eta_star` is located by bracketed root search on the quadrature-evaluated
/// budget; the closed-form partial mean is checked against it in tests.
pub fn h_interval_at_corner(model: &ValidatedModel) -> Result<CornerInterval> {
    let pref = model.pref;
    let growth = (model.market.r * model.market.tau).exp();
    if pref.gamma <= growth {
        return Err(Error::Domain(format!(
            "corner interval needs gamma > e^(r tau) = {growth}, got gamma = {}",
            pref.gamma
        )));
    }
    if pref.k <= 0.0 {
        return Err(Error::Domain("corner interval needs k > 0".into()));
    }
    let kernel = kernel_law(model, model.market.tau)?;
    let payout = pref.gamma * (1.0 + pref.k.powf(-1.0 / (1.0 - pref.alpha)));
    let xi = |eta: f64| -> Result<f64> {
        Ok(payout * kernel.expect(|z| if z <= eta { z } else { 0.0 }, &[eta])? - 1.0)
    };
    let mut lo = 1.0;
    let mut f_lo = xi(lo)?;
    let mut n = 0;
    while f_lo > 0.0 {
        lo *= 0.5;
        f_lo = xi(lo)?;
        n += 1;
        if n > 200 {
            return Err(Error::NonConvergent {
                what: "corner threshold bracket",
                iterations: n,
            });
        }
    }
    let mut hi = lo.max(1.0);
    let mut f_hi = xi(hi)?;
    while f_hi < 0.0 {
        hi *= 2.0;
        f_hi = xi(hi)?;
        n += 1;
        if n > 200 {
            return Err(Error::NonConvergent {
                what: "corner threshold bracket",
                iterations: n,
            });
        }
    }
    let mut inner_err = None;
    let eta_star = solve::brent(
        |e| match xi(e) {
            Ok(v) => v,
            Err(err) => {
                inner_err = Some(err);
                f64::NAN
            }
        },
        lo,
        hi,
        f_lo,
        f_hi,
        model.tol.root_rel,
        "corner threshold",
    )?;
    if let Some(e) = inner_err {
        return Err(e);
    }
    Ok(CornerInterval {
        eta_star,
        h_bar: kernel.cdf(eta_star) * payout.powf(pref.alpha),
        payout,
    })
}

/// Builds the digital member of the corner optimizer family with
/// `E[Y^alpha] = target_xi`.
pub fn digital_law(target_xi: f64, model: &ValidatedModel) -> Result<PayoffLaw> {
    let corner = h_interval_at_corner(model)?;
    if !(0.0..=corner.h_bar * (1.0 + 1e-12)).contains(&target_xi) {
        return Err(Error::Domain(format!(
            "target alpha-moment {target_xi} outside the feasible corner interval [0, {}]",
            corner.h_bar
        )));
    }
    let pref = model.pref;
    let kernel = kernel_law(model, model.market.tau)?;
    let p = (target_xi / corner.payout.powf(pref.alpha)).min(1.0);
    let threshold_eta = kernel.quantile(p);
    Ok(PayoffLaw::Digital {
        theta: envelope::theta_lower(&pref),
        payout: corner.payout,
        threshold_eta,
    })
}

/// Duality certificates for a solved law.
#[derive(Debug, Clone, Copy, Default)]
pub struct DualityReport {
    /// `E[Z y(Z)] - 1`.
    pub budget_residual: f64,
    /// `E[envelope(Y*)] - E[F(Y*)]`: zero when the optimizer lives on the
    /// contact set.
    pub duality_gap: f64,
    /// `E[J(lambda* Z)] + lambda* - Phi` with `J` the conjugate of the
    /// majorant: an upper-bound certificate for the primal value.
    pub upper_bound_gap: f64,
    /// For gain-only laws, quadrature mass of the ruin atom minus the
    /// closed-form `1 - L(threshold)`.
    pub atom_mass_residual: Option<f64>,
}

pub fn certify(sol: &OnePeriodSolution, model: &ValidatedModel) -> Result<DualityReport> {
    let kernel = kernel_law(model, model.market.tau)?;
    let pref = model.pref;
    let breaks = sol.law.breakpoints();
    let budget_residual = match sol.law {
        PayoffLaw::TwoBranch(_) | PayoffLaw::GainOnly(_) => {
            budget(&sol.law, &kernel)? - 1.0
        }
        _ => (budget(&sol.law, &kernel)? - 1.0).max(0.0),
    };
    let (duality_gap, upper_bound_gap, atom_mass_residual) = match &sol.law {
        PayoffLaw::TwoBranch(d) | PayoffLaw::GainOnly(d) => {
            let geom = d.geom;
            let e_fbar = kernel.expect(
                |z| envelope_eval(sol.law.eval(z), &geom, &pref),
                &breaks,
            )?;
            let e_f = kernel.expect(
                |z| envelope::f_raw(sol.law.eval(z), sol.law.theta(), &pref),
                &breaks,
            )?;
            // J(lambda z) = envelope(y(z)) - lambda z y(z) pointwise: the law
            // is the conjugate maximizer by construction.
            let e_j = kernel.expect(
                |z| {
                    let y = sol.law.eval(z);
                    envelope_eval(y, &geom, &pref) - d.lambda_star * z * y
                },
                &breaks,
            )?;
            let upper = e_j + d.lambda_star - sol.phi_value;
            let atom = if matches!(sol.law, PayoffLaw::GainOnly(_)) {
                let qm = kernel.expect(
                    |z| if sol.law.eval(z) == 0.0 { 1.0 } else { 0.0 },
                    &breaks,
                )?;
                Some(qm - (1.0 - kernel.cdf(d.threshold_z)))
            } else {
                None
            };
            (e_fbar - e_f, upper, atom)
        }
        _ => (0.0, 0.0, None),
    };
    Ok(DualityReport {
        budget_residual,
        duality_gap,
        upper_bound_gap,
        atom_mass_residual,
    })
}

/// Brute-force lower bound for `Phi(theta)` on discretized grids, independent
/// of the dual solver: quantile-midpoint atoms for the kernel, a log-spaced
/// payoff grid including zero, a zoomed multiplier scan picking the
/// pointwise Lagrangian maximizer per atom at each multiplier, selection of
/// the multiplier whose budget is closest to one from below, then greedy
/// single-atom budget repair. Returns the achieved (feasible) objective.
pub fn oracle_discrete(theta: f64, model: &ValidatedModel, n_z: usize, n_y: usize) -> f64 {
    let pref = model.pref;
    let kernel = kernel_law(model, model.market.tau).expect("tau > 0 in a validated model");
    let z: Vec<f64> = (0..n_z)
        .map(|i| kernel.quantile((i as f64 + 0.5) / n_z as f64))
        .collect();
    let mut y = Vec::with_capacity(n_y + 1);
    y.push(0.0);
    let (y_lo, y_hi) = (1e-4 * pref.gamma, 1e4 * pref.gamma);
    for j in 0..n_y {
        y.push(y_lo * (y_hi / y_lo).powf(j as f64 / (n_y - 1) as f64));
    }
    let fy: Vec<f64> = y.iter().map(|&v| envelope::f_raw(v, theta, &pref)).collect();
    let nf = n_z as f64;

    let solve_at = |lambda: f64| -> (Vec<usize>, f64, f64) {
        let mut picks = Vec::with_capacity(n_z);
        let mut budget = 0.0;
        let mut obj = 0.0;
        for &zi in &z {
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for (j, (&yj, &fj)) in y.iter().zip(&fy).enumerate() {
                let v = fj - lambda * zi * yj;
                if v > best_v {
                    best_v = v;
                    best = j;
                }
            }
            picks.push(best);
            budget += zi * y[best] / nf;
            obj += fy[best] / nf;
        }
        (picks, budget, obj)
    };

    // zoomed geometric multiplier scan, keeping the feasible budget closest
    // to one from below
    let mut lam_lo: f64 = 1e-6;
    let mut lam_hi: f64 = 1e6;
    let mut best_lam = lam_hi;
    for _ in 0..3 {
        let n_lam = 600;
        let mut best_budget = f64::NEG_INFINITY;
        let mut best_idx = None;
        for i in 0..n_lam {
            let lam = lam_lo * (lam_hi / lam_lo).powf(i as f64 / (n_lam - 1) as f64);
            let (_, budget, _) = solve_at(lam);
            if budget <= 1.0 && budget > best_budget {
                best_budget = budget;
                best_idx = Some(i);
            }
        }
        let Some(i) = best_idx else {
            return -pref.k * pref.gamma.powf(pref.alpha);
        };
        best_lam = lam_lo * (lam_hi / lam_lo).powf(i as f64 / (n_lam - 1) as f64);
        let step = (lam_hi / lam_lo).powf(1.0 / (n_lam - 1) as f64);
        lam_lo = best_lam / step;
        lam_hi = best_lam * step;
    }

    let (mut picks, mut budget, mut obj) = solve_at(best_lam);
    // greedy repair: spend leftover budget one atom at a time
    for _ in 0..10 * n_z {
        let slack = 1.0 - budget;
        let mut best_gain = 1e-15;
        let mut best_move = None;
        for (i, &zi) in z.iter().enumerate() {
            let room = slack + zi * y[picks[i]] / nf;
            for (j, &yj) in y.iter().enumerate() {
                if zi * yj / nf <= room * (1.0 + 1e-14) {
                    let gain = (fy[j] - fy[picks[i]]) / nf;
                    if gain > best_gain {
                        best_gain = gain;
                        best_move = Some((i, j));
                    }
                }
            }
        }
        let Some((i, j)) = best_move else { break };
        budget += z[i] * (y[j] - y[picks[i]]) / nf;
        obj += best_gain;
        picks[i] = j;
    }
    obj
}
