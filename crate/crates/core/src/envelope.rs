//! The S-shaped one-period objective F(y; theta) = U(y - gamma) + theta y^alpha,
//! its smallest concave majorant, and the inverse marginal maps.
//!
//! The majorant has four regimes depending on where theta sits relative to
//! 0, -1 and the lower threshold theta_lower = -(1 + k^{1/(1-alpha)})^{1-alpha}:
//! a chord over the benchmark hump for positive theta, a chord from the
//! origin for mildly negative theta, an additional flat cap for moderately
//! negative theta, and a globally flat envelope below theta_lower.

use crate::error::{Error, Result};
use crate::market::{PreferenceParams, Tolerances};
use crate::solve;

/// Piecewise power utility: x^alpha on gains, -k|x|^alpha on losses.
pub fn utility(x: f64, pref: &PreferenceParams) -> f64 {
    if x >= 0.0 {
        x.powf(pref.alpha)
    } else {
        -pref.k * (-x).powf(pref.alpha)
    }
}

/// F(y; theta) = U(y - gamma) + theta y^alpha for a gross return y >= 0.
pub fn f_eval(y: f64, theta: f64, pref: &PreferenceParams) -> Result<f64> {
    if y < 0.0 {
        return Err(Error::Domain(format!("gross return must be >= 0, got {y}")));
    }
    Ok(f_raw(y, theta, pref))
}

#[inline]
pub(crate) fn f_raw(y: f64, theta: f64, pref: &PreferenceParams) -> f64 {
    utility(y - pref.gamma, pref) + theta * y.powf(pref.alpha)
}

/// theta_lower = -(1 + k^{1/(1-alpha)})^{1-alpha} <= -1.
pub fn theta_lower(pref: &PreferenceParams) -> f64 {
    let a = pref.alpha;
    -(1.0 + pref.k.powf(1.0 / (1.0 - a))).powf(1.0 - a)
}

/// c~ = 1 / (1 + (k/theta)^{1/(2-alpha)}), the contact bound of the loss
/// branch for theta > 0.
pub fn c_tilde(theta: f64, pref: &PreferenceParams) -> f64 {
    if pref.k == 0.0 {
        1.0
    } else {
        1.0 / (1.0 + (pref.k / theta).powf(1.0 / (2.0 - pref.alpha)))
    }
}

/// n~ = the marginal of the loss branch at y = c~ gamma, the lower edge of
/// the admissible slope range of I1.
pub fn n_tilde(theta: f64, pref: &PreferenceParams) -> f64 {
    let ct = c_tilde(theta, pref);
    marginal_loss(ct * pref.gamma, theta, pref)
}

/// alpha [ k (gamma - y)^{alpha-1} + theta y^{alpha-1} ], the derivative of
/// F on the loss side (0 < y < gamma).
#[inline]
fn marginal_loss(y: f64, theta: f64, pref: &PreferenceParams) -> f64 {
    let a = pref.alpha;
    a * (pref.k * (pref.gamma - y).powf(a - 1.0) + theta * y.powf(a - 1.0))
}

#[inline]
fn marginal_loss_deriv(y: f64, theta: f64, pref: &PreferenceParams) -> f64 {
    let a = pref.alpha;
    a * (a - 1.0) * (-pref.k * (pref.gamma - y).powf(a - 2.0) + theta * y.powf(a - 2.0))
}

/// alpha [ (y - gamma)^{alpha-1} + theta y^{alpha-1} ], the derivative of F
/// on the gain side (y > gamma).
#[inline]
fn marginal_gain(y: f64, theta: f64, pref: &PreferenceParams) -> f64 {
    let a = pref.alpha;
    a * ((y - pref.gamma).powf(a - 1.0) + theta * y.powf(a - 1.0))
}

#[inline]
fn marginal_gain_deriv(y: f64, theta: f64, pref: &PreferenceParams) -> f64 {
    let a = pref.alpha;
    a * (a - 1.0) * ((y - pref.gamma).powf(a - 2.0) + theta * y.powf(a - 2.0))
}

/// I1(q; theta): for theta > 0 and q >= n~(theta), the unique root of the
/// loss-side marginal on (0, c~ gamma]. Non-increasing in q, non-decreasing
/// in theta.
pub fn inv_marginal_loss(
    q: f64,
    theta: f64,
    pref: &PreferenceParams,
    tol: &Tolerances,
) -> Result<f64> {
    if theta <= 0.0 {
        return Err(Error::Domain(format!(
            "inverse loss marginal needs theta > 0, got {theta}"
        )));
    }
    let a = pref.alpha;
    if pref.k == 0.0 {
        if q <= 0.0 {
            return Err(Error::Domain("slope must be positive when k = 0".into()));
        }
        return Ok((a * theta / q).powf(1.0 / (1.0 - a)));
    }
    let nt = n_tilde(theta, pref);
    let hi = c_tilde(theta, pref) * pref.gamma;
    if q < nt * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "slope {q} below the loss-branch minimum {nt}"
        )));
    }
    if q <= nt {
        return Ok(hi);
    }
    let guess = (a * theta / q).powf(1.0 / (1.0 - a)).min(0.5 * hi);
    solve::newton_decreasing(
        |y| marginal_loss(y, theta, pref) - q,
        |y| marginal_loss_deriv(y, theta, pref),
        hi * 1e-300,
        hi,
        guess,
        tol.root_rel,
        "inverse loss marginal",
    )
}

/// I2(q; theta): the unique root y > gamma of the gain-side marginal.
/// Defined for q > 0 when theta >= -1 and for q >= 0 when theta < -1
/// (where the root at q = 0 is c4 gamma in closed form).
pub fn inv_marginal_gain(
    q: f64,
    theta: f64,
    pref: &PreferenceParams,
    tol: &Tolerances,
) -> Result<f64> {
    let a = pref.alpha;
    let gamma = pref.gamma;
    if q < 0.0 {
        return Err(Error::Domain(format!("slope must be >= 0, got {q}")));
    }
    let hi = if theta < -1.0 {
        let c4 = 1.0 / (1.0 - theta.abs().powf(-1.0 / (1.0 - a)));
        if q == 0.0 {
            return Ok(c4 * gamma);
        }
        c4 * gamma
    } else {
        if q == 0.0 {
            return Err(Error::Domain(
                "slope 0 is outside the gain-marginal range for theta >= -1".into(),
            ));
        }
        let mut hi = gamma + (a / q).powf(1.0 / (1.0 - a)) + gamma;
        let mut n = 0;
        while marginal_gain(hi, theta, pref) > q {
            hi = gamma + (hi - gamma) * 4.0;
            n += 1;
            if n > 200 {
                return Err(Error::NonConvergent {
                    what: "inverse gain marginal bracket",
                    iterations: n,
                });
            }
        }
        hi
    };
    let lo = gamma * (1.0 + 1e-15);
    let guess = (gamma + (a / q).powf(1.0 / (1.0 - a))).clamp(lo, hi);
    solve::newton_decreasing(
        |y| marginal_gain(y, theta, pref) - q,
        |y| marginal_gain_deriv(y, theta, pref),
        lo,
        hi,
        guess,
        tol.root_rel,
        "inverse gain marginal",
    )
}

/// Case tag plus constants of the smallest concave majorant at a given theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeCase {
    /// theta > 0: chord of slope m1 between c1 gamma and c2 gamma.
    PositiveTheta { c1: f64, c2: f64, m1: f64 },
    /// theta in [-1, 0] above theta_lower: chord of slope m2 from 0 to c3 gamma.
    MildNegative { c3: f64, m2: f64 },
    /// theta in (theta_lower, -1): chord from 0 to c3 gamma, flat beyond c4 gamma.
    ModerateNegative { c3: f64, c4: f64, m2: f64 },
    /// theta <= theta_lower: the envelope is identically -k gamma^alpha.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeGeometry {
    pub theta: f64,
    pub theta_lower: f64,
    pub case: EnvelopeCase,
}

/// Builds the majorant geometry at `theta`. Root searches start from the
/// theta-independent brackets of the solution constants.
pub fn envelope_geometry(
    theta: f64,
    pref: &PreferenceParams,
    tol: &Tolerances,
) -> Result<EnvelopeGeometry> {
    let tl = theta_lower(pref);
    let case = if theta <= tl {
        EnvelopeCase::Degenerate
    } else if theta <= 0.0 {
        let c3 = solve_c3(theta, pref, tol)?;
        let a = pref.alpha;
        let m2 = pref.gamma.powf(a - 1.0) * ((c3 - 1.0).powf(a) + theta * c3.powf(a) + pref.k) / c3;
        if theta >= -1.0 {
            EnvelopeCase::MildNegative { c3, m2 }
        } else {
            let c4 = 1.0 / (1.0 - theta.abs().powf(-1.0 / (1.0 - a)));
            EnvelopeCase::ModerateNegative { c3, c4, m2 }
        }
    } else {
        // theta below 1e-12 is numerically indistinguishable from the chord
        // geometry's degeneration point; clamp before solving.
        let th = theta.max(1e-12);
        let (c1, c2, q) = solve_c1_c2(th, pref, tol)?;
        EnvelopeCase::PositiveTheta {
            c1,
            c2,
            m1: q * pref.gamma.powf(pref.alpha - 1.0),
        }
    };
    Ok(EnvelopeGeometry {
        theta,
        theta_lower: tl,
        case,
    })
}

/// The benchmark-normalized chord system for theta > 0, reduced to one
/// dimension in the common slope q: c1 = I1(q), c2 = I2(q) by the marginal
/// equalities, and q solves the chord equation. The search bracket comes
/// from the theta-independent solution bounds.
fn solve_c1_c2(theta: f64, pref: &PreferenceParams, tol: &Tolerances) -> Result<(f64, f64, f64)> {
    let unit = PreferenceParams { gamma: 1.0, ..*pref };
    let a = pref.alpha;
    let resid = |q: f64| -> Result<f64> {
        let c2 = inv_marginal_gain(q, theta, &unit, tol)?;
        let c1 = inv_marginal_loss(q, theta, &unit, tol)?;
        Ok((f_raw(c2, theta, &unit) - f_raw(c1, theta, &unit)) / (c2 - c1) - q)
    };
    let q_lo = if pref.k == 0.0 {
        // the loss branch collapses; the slope range is open below
        let mut q = a * theta;
        let mut n = 0;
        while resid(q)? < 0.0 {
            q *= 0.5;
            n += 1;
            if n > 200 {
                return Err(Error::NonConvergent {
                    what: "chord slope lower bracket",
                    iterations: n,
                });
            }
        }
        q
    } else {
        n_tilde(theta, &unit)
    };
    let mut q_hi = if pref.k > 0.0 {
        // solution bound: c2 >= the root of (c-1)^{a-1} + theta c^{a-1} = k,
        // translated into slope units and padded
        let c2_cap = inv_marginal_gain(a * pref.k, theta, &unit, tol)?;
        let ct = c_tilde(theta, &unit);
        ((c2_cap - 1.0).powf(a) + theta * c2_cap.powf(a) + pref.k) / (1.0 - ct)
    } else {
        q_lo * 4.0
    };
    let r_lo = resid(q_lo)?;
    if r_lo <= 0.0 {
        return Err(Error::NonConvergent {
            what: "chord system bracket",
            iterations: 0,
        });
    }
    let mut r_hi = resid(q_hi)?;
    let mut n = 0;
    while r_hi > 0.0 {
        q_hi *= 2.0;
        r_hi = resid(q_hi)?;
        n += 1;
        if n > 200 {
            return Err(Error::NonConvergent {
                what: "chord slope upper bracket",
                iterations: n,
            });
        }
    }
    let mut err = None;
    let q = solve::brent(
        |q| match resid(q) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        q_lo,
        q_hi,
        r_lo,
        r_hi,
        tol.root_rel,
        "chord system",
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    let c2 = inv_marginal_gain(q, theta, &unit, tol)?;
    let c1 = inv_marginal_loss(q, theta, &unit, tol)?;
    Ok((c1, c2, q))
}

/// c3 solves the origin-chord tangency equation; the c-multiplied residual
/// is increasing with a sign change inside the theta-independent bracket
/// (1, 1 + k^{-1/(1-alpha)}].
fn solve_c3(theta: f64, pref: &PreferenceParams, tol: &Tolerances) -> Result<f64> {
    let a = pref.alpha;
    let k = pref.k;
    let f3 = |c: f64| {
        (c - 1.0).powf(a) + theta * (1.0 - a) * c.powf(a) - a * c * (c - 1.0).powf(a - 1.0) + k
    };
    let lo = 1.0 + 1e-12;
    let mut hi = if k > 0.0 {
        1.0 + k.powf(-1.0 / (1.0 - a))
    } else {
        2.0
    };
    let f_lo = f3(lo);
    let mut f_hi = f3(hi);
    let mut n = 0;
    while f_hi < 0.0 {
        hi *= 2.0;
        f_hi = f3(hi);
        n += 1;
        if n > 200 {
            return Err(Error::NonConvergent {
                what: "origin chord bracket",
                iterations: n,
            });
        }
    }
    solve::brent(f3, lo, hi, f_lo, f_hi, tol.root_rel, "origin chord")
}

/// Evaluates the concave majorant at y >= 0.
pub fn envelope_eval(y: f64, geom: &EnvelopeGeometry, pref: &PreferenceParams) -> f64 {
    let y = y.max(0.0);
    let gamma = pref.gamma;
    let floor = -pref.k * gamma.powf(pref.alpha);
    match geom.case {
        EnvelopeCase::Degenerate => floor,
        EnvelopeCase::PositiveTheta { c1, c2, m1 } => {
            if y < c1 * gamma || y > c2 * gamma {
                f_raw(y, geom.theta, pref)
            } else {
                f_raw(c1 * gamma, geom.theta, pref) + m1 * (y - c1 * gamma)
            }
        }
        EnvelopeCase::MildNegative { c3, m2 } => {
            if y >= c3 * gamma {
                f_raw(y, geom.theta, pref)
            } else {
                floor + m2 * y
            }
        }
        EnvelopeCase::ModerateNegative { c3, c4, m2 } => {
            if y < c3 * gamma {
                floor + m2 * y
            } else if y <= c4 * gamma {
                f_raw(y, geom.theta, pref)
            } else {
                f_raw(c4 * gamma, geom.theta, pref)
            }
        }
    }
}
