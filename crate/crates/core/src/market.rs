//! Model parameters, validation, and the lognormal pricing-kernel law.

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::quad;

/// Truncation of the standardized Gaussian variable. The tail mass beyond
/// eight standard deviations is below 1.3e-15, and polynomially bounded
/// integrands keep the truncation error under 1e-13.
const W_MAX: f64 = 8.0;

static STD_NORMAL: Lazy<Normal> = Lazy::new(|| Normal::new(0.0, 1.0).unwrap());

pub(crate) fn std_normal_pdf(w: f64) -> f64 {
    (-0.5 * w * w).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub(crate) fn std_normal_cdf(w: f64) -> f64 {
    STD_NORMAL.cdf(w)
}

pub(crate) fn std_normal_quantile(p: f64) -> f64 {
    STD_NORMAL.inverse_cdf(p)
}

/// Black-Scholes market: drift, volatility, risk-free rate, period length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    pub tau: f64,
}

/// Agent preferences: S-shaped utility curvature and loss aversion,
/// performance benchmark, discount rate, present-bias factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceParams {
    pub alpha: f64,
    pub k: f64,
    pub gamma: f64,
    pub delta: f64,
    pub beta: f64,
}

/// Numerical tolerances threaded through every solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute tolerance of the adaptive quadrature.
    pub quad_abs: f64,
    /// Relative tolerance of bracketed root searches.
    pub root_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quad_abs: 1e-10,
            root_rel: 1e-12,
        }
    }
}

/// A validated model with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedModel {
    pub market: MarketParams,
    pub pref: PreferenceParams,
    /// Sharpe ratio (mu - r) / sigma.
    pub phi: f64,
    /// Merton exponent r*alpha + alpha*phi^2 / (2(1-alpha)).
    pub h: f64,
    /// Merton bound e^{h tau} = sup E[Y^alpha] over admissible gross returns.
    pub e_h_tau: f64,
    /// e^{-(delta - h) tau}, the contraction modulus of the Bellman-type map.
    pub contraction_modulus: f64,
    pub tol: Tolerances,
}

/// Checks field invariants and the well-posedness condition `delta > h`.
pub fn validate(market: MarketParams, pref: PreferenceParams) -> Result<ValidatedModel> {
    validate_with(market, pref, Tolerances::default())
}

pub fn validate_with(
    market: MarketParams,
    pref: PreferenceParams,
    tol: Tolerances,
) -> Result<ValidatedModel> {
    for (name, v) in [
        ("mu", market.mu),
        ("sigma", market.sigma),
        ("r", market.r),
        ("tau", market.tau),
        ("alpha", pref.alpha),
        ("k", pref.k),
        ("gamma", pref.gamma),
        ("delta", pref.delta),
        ("beta", pref.beta),
    ] {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite, got {v}")));
        }
    }
    if market.sigma <= 0.0 {
        return Err(Error::Domain(format!("sigma must be > 0, got {}", market.sigma)));
    }
    if market.tau <= 0.0 {
        return Err(Error::Domain(format!("tau must be > 0, got {}", market.tau)));
    }
    if !(pref.alpha > 0.0 && pref.alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {}", pref.alpha)));
    }
    if pref.k < 0.0 {
        return Err(Error::Domain(format!("k must be >= 0, got {}", pref.k)));
    }
    if pref.gamma <= 0.0 {
        return Err(Error::Domain(format!("gamma must be > 0, got {}", pref.gamma)));
    }
    if pref.delta <= 0.0 {
        return Err(Error::Domain(format!("delta must be > 0, got {}", pref.delta)));
    }
    if !(0.0..=1.0).contains(&pref.beta) {
        return Err(Error::Domain(format!("beta must lie in [0,1], got {}", pref.beta)));
    }
    if !(tol.quad_abs > 0.0 && tol.root_rel > 0.0) {
        return Err(Error::Domain("tolerances must be positive".into()));
    }

    let phi = (market.mu - market.r) / market.sigma;
    if phi == 0.0 {
        return Err(Error::DegenerateMarket);
    }
    let h = market.r * pref.alpha + pref.alpha * phi * phi / (2.0 * (1.0 - pref.alpha));
    if pref.delta <= h {
        return Err(Error::IllPosed {
            delta: pref.delta,
            h,
        });
    }
    Ok(ValidatedModel {
        market,
        pref,
        phi,
        h,
        e_h_tau: (h * market.tau).exp(),
        contraction_modulus: (-(pref.delta - h) * market.tau).exp(),
        tol,
    })
}

/// Lognormal law of the pricing-kernel ratio over a horizon, plus the
/// discontinuity-aware quadrature used for every expectation downstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelLaw {
    pub horizon: f64,
    pub log_mean: f64,
    pub log_sd: f64,
    quad_abs: f64,
}

/// Law of `Z_horizon`: log Z is Gaussian with mean `-(r + phi^2/2) h` and
/// standard deviation `|phi| sqrt(h)`.
pub fn kernel_law(model: &ValidatedModel, horizon: f64) -> Result<KernelLaw> {
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    Ok(KernelLaw {
        horizon,
        log_mean: -(model.market.r + model.phi * model.phi / 2.0) * horizon,
        log_sd: model.phi.abs() * horizon.sqrt(),
        quad_abs: model.tol.quad_abs,
    })
}

impl KernelLaw {
    pub fn pdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        std_normal_pdf((z.ln() - self.log_mean) / self.log_sd) / (z * self.log_sd)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        std_normal_cdf((z.ln() - self.log_mean) / self.log_sd)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        (self.log_mean + self.log_sd * std_normal_quantile(p)).exp()
    }

    /// E[Z^p] by the lognormal moment formula.
    pub fn power_moment(&self, p: f64) -> f64 {
        (p * self.log_mean + 0.5 * p * p * self.log_sd * self.log_sd).exp()
    }

    pub fn mean(&self) -> f64 {
        self.power_moment(1.0)
    }

    /// E[Z 1{Z <= eta}], the partial first moment (closed form).
    pub fn partial_mean(&self, eta: f64) -> f64 {
        if eta <= 0.0 {
            return 0.0;
        }
        let s = self.log_sd;
        self.mean() * std_normal_cdf((eta.ln() - self.log_mean - s * s) / s)
    }

    /// E[f(Z)] by adaptive Gauss-Legendre in the standardized Gaussian
    /// variable, with the domain split exactly at each breakpoint. The
    /// breakpoints must list every discontinuity or kink of `f` in z-space;
    /// the quadrature never guesses them.
    pub fn expect<F: FnMut(f64) -> f64>(&self, f: F, breakpoints: &[f64]) -> Result<f64> {
        self.expect_tol(f, breakpoints, self.quad_abs)
    }

    pub fn expect_tol<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        breakpoints: &[f64],
        abs_tol: f64,
    ) -> Result<f64> {
        let m = self.log_mean;
        let s = self.log_sd;
        let cuts: Vec<f64> = breakpoints
            .iter()
            .filter(|z| **z > 0.0 && z.is_finite())
            .map(|z| (z.ln() - m) / s)
            .collect();
        let mut g = |w: f64| f((m + s * w).exp()) * std_normal_pdf(w);
        quad::integrate_split(&mut g, -W_MAX, W_MAX, &cuts, abs_tol)
    }

    /// Like [`expect`], but to a relative target: a first pass estimates the
    /// magnitude, a second pass integrates the integrand normalized by that
    /// magnitude (so the adaptive engine works at O(1) scale even when the
    /// integral itself is tiny).
    pub fn expect_rel<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breakpoints: &[f64],
        rel: f64,
    ) -> Result<f64> {
        let rough = self.expect_tol(&f, breakpoints, self.quad_abs)?;
        let scale = rough.abs();
        if scale == 0.0 || scale * rel >= self.quad_abs {
            return Ok(rough);
        }
        let refined = self.expect_tol(|z| f(z) / scale, breakpoints, rel)?;
        Ok(refined * scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn figure_market() -> MarketParams {
        MarketParams {
            mu: 0.1,
            sigma: 0.15,
            r: 0.01,
            tau: 1.0,
        }
    }

    pub(crate) fn figure_pref(gamma: f64) -> PreferenceParams {
        PreferenceParams {
            alpha: 0.5,
            k: 1.25,
            gamma,
            delta: 0.3,
            beta: 0.4,
        }
    }

    #[test]
    fn validate_figure_parameters() {
        let m = validate(figure_market(), figure_pref(1.0)).unwrap();
        assert_abs_diff_eq!(m.phi, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(m.h, 0.185, epsilon = 1e-12);
        assert_abs_diff_eq!(m.e_h_tau, 0.185f64.exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(m.contraction_modulus, (-0.115f64).exp(), epsilon = 1e-12);
        assert!(m.contraction_modulus < 1.0);
    }

    #[test]
    fn validate_rejects_degenerate_market() {
        let mut mk = figure_market();
        mk.mu = mk.r;
        assert_eq!(
            validate(mk, figure_pref(1.0)).unwrap_err(),
            Error::DegenerateMarket
        );
    }

    #[test]
    fn validate_rejects_ill_posed_discount() {
        let mut pref = figure_pref(1.0);
        pref.delta = 0.1;
        match validate(figure_market(), pref).unwrap_err() {
            Error::IllPosed { delta, h } => {
                assert_eq!(delta, 0.1);
                assert_abs_diff_eq!(h, 0.185, epsilon = 1e-12);
            }
            e => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn validate_rejects_bad_domains() {
        let mk = figure_market();
        let mut p = figure_pref(1.0);
        p.alpha = 1.2;
        assert!(matches!(validate(mk, p), Err(Error::Domain(_))));
        let mut p = figure_pref(1.0);
        p.beta = -0.1;
        assert!(matches!(validate(mk, p), Err(Error::Domain(_))));
        let mut mk2 = mk;
        mk2.sigma = 0.0;
        assert!(matches!(validate(mk2, figure_pref(1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn kernel_law_figure_parameters() {
        let m = validate(figure_market(), figure_pref(1.0)).unwrap();
        let law = kernel_law(&m, 1.0).unwrap();
        assert_abs_diff_eq!(law.log_mean, -0.19, epsilon = 1e-12);
        assert_abs_diff_eq!(law.log_sd, 0.6, epsilon = 1e-12);
        assert!(kernel_law(&m, 0.0).is_err());
        assert!(kernel_law(&m, -1.0).is_err());
    }

    #[test]
    fn kernel_moments_match_closed_forms() {
        let m = validate(figure_market(), figure_pref(1.0)).unwrap();
        let law = kernel_law(&m, 1.0).unwrap();
        let one = law.expect(|_| 1.0, &[]).unwrap();
        assert_abs_diff_eq!(one, 1.0, epsilon = 1e-12);
        let mean = law.expect(|z| z, &[]).unwrap();
        assert_abs_diff_eq!(mean, (-0.01f64).exp(), epsilon = 1e-9);
        let second = law.expect(|z| z * z, &[]).unwrap();
        assert_abs_diff_eq!(second, 0.34f64.exp(), epsilon = 1e-9);
    }

    #[test]
    fn median_indicator_integrates_to_half() {
        let m = validate(figure_market(), figure_pref(1.0)).unwrap();
        let law = kernel_law(&m, 1.0).unwrap();
        let med = law.log_mean.exp();
        let p = law
            .expect(|z| if z <= med { 1.0 } else { 0.0 }, &[med])
            .unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn partial_mean_matches_quadrature() {
        let m = validate(figure_market(), figure_pref(1.0)).unwrap();
        let law = kernel_law(&m, 1.0).unwrap();
        for eta in [0.2, 0.8, 1.5, 4.0] {
            let q = law
                .expect(|z| if z <= eta { z } else { 0.0 }, &[eta])
                .unwrap();
            assert_abs_diff_eq!(q, law.partial_mean(eta), epsilon = 1e-10);
        }
    }

    #[test]
    fn merton_power_law_attains_the_h_bound() {
        // Independent Merton optimizer: y(z) = c z^{-1/(1-alpha)} with the
        // budget-binding constant; its alpha-moment must hit e^{h tau}.
        let m = validate(figure_market(), figure_pref(1.0)).unwrap();
        let law = kernel_law(&m, 1.0).unwrap();
        let a = m.pref.alpha;
        let p = -a / (1.0 - a);
        let c = 1.0
            / law
                .expect(|z| z * z.powf(-1.0 / (1.0 - a)), &[])
                .unwrap();
        let moment = law
            .expect(|z| (c * z.powf(-1.0 / (1.0 - a))).powf(a), &[])
            .unwrap();
        assert_abs_diff_eq!(moment, m.e_h_tau, epsilon = 1e-8);
        assert!(moment <= m.e_h_tau * (1.0 + 1e-8));
        // closed-form cross-check of the dual route
        assert_abs_diff_eq!(law.power_moment(p).powf(1.0 - a), m.e_h_tau, epsilon = 1e-12);
    }
}
