//! Within-period investment-level curves by replication in the dual state.
//!
//! Conditional on the kernel state z at time `t_frac * tau` inside a period,
//! the replicating portfolio's value per unit of period-start wealth is
//! `v(z) = E[W y(z W)]` with W the kernel ratio over the remaining horizon,
//! and the fraction of current wealth held in the risky asset is
//! `-(phi/sigma) z v'(z) / v(z)`. The derivative differentiates the
//! lognormal density inside the integral, never the payoff (which has kinks
//! and atoms): `z v'(z) = -v(z) + E[W y(z W) w] / s` where `w` is the
//! standardized Gaussian of W and `s` its log standard deviation.

use crate::error::{Error, Result};
use crate::fixed_point::agent_constants;
use crate::market::{kernel_law, ValidatedModel};
use crate::one_period::{LawKind, PayoffLaw};

use super::{strategy_plan, AgentType};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t_frac: f64,
    pub log_return: f64,
    pub fraction_invested: f64,
    /// Portfolio value relative to period-start wealth at this state.
    pub wealth_ratio: f64,
}

/// The constant Merton fraction `(mu - r) / (sigma^2 (1 - alpha))`, the
/// figures' reference line.
pub fn merton_ratio(model: &ValidatedModel) -> f64 {
    (model.market.mu - model.market.r)
        / (model.market.sigma * model.market.sigma * (1.0 - model.pref.alpha))
}

/// Maps a running stock log-return to the kernel state at time
/// `t_frac * tau` through the shared Brownian path.
fn kernel_state(log_return: f64, t_frac: f64, model: &ValidatedModel) -> f64 {
    let mk = &model.market;
    let t = t_frac * mk.tau;
    let drift = (mk.mu - 0.5 * mk.sigma * mk.sigma) * t;
    (-(model.phi / mk.sigma) * (log_return - drift) - (mk.r + 0.5 * model.phi * model.phi) * t)
        .exp()
}

/// Investment-level curve of one payoff law on a stock log-return grid at a
/// fixed fraction of the period.
pub fn investment_level(
    law: &PayoffLaw,
    t_frac: f64,
    log_return_grid: &[f64],
    model: &ValidatedModel,
) -> Result<Vec<CurvePoint>> {
    if !(0.0..1.0).contains(&t_frac) {
        return Err(Error::Domain(format!(
            "t_frac must lie in [0,1), got {t_frac}"
        )));
    }
    if law.kind() == LawKind::Zero {
        return Err(Error::Domain(
            "the zero law has no within-period replication curve".into(),
        ));
    }
    let remaining = (1.0 - t_frac) * model.market.tau;
    let w_law = kernel_law(model, remaining)?;
    let (mw, sw) = (w_law.log_mean, w_law.log_sd);
    let mut out = Vec::with_capacity(log_return_grid.len());
    for &s_ret in log_return_grid {
        let z = kernel_state(s_ret, t_frac, model);
        let breaks: Vec<f64> = law.breakpoints().iter().map(|b| b / z).collect();
        let v = w_law.expect_rel(|w| w * law.eval(z * w), &breaks, 1e-12)?;
        if v.is_nan() || v <= 0.0 {
            return Err(Error::DegenerateWealth(v));
        }
        let tilted = w_law.expect_rel(
            |w| w * law.eval(z * w) * (w.ln() - mw) / sw,
            &breaks,
            1e-12,
        )?;
        let z_v_prime = -v + tilted / sw;
        out.push(CurvePoint {
            t_frac,
            log_return: s_ret,
            fraction_invested: -(model.phi / model.market.sigma) * z_v_prime / v,
            wealth_ratio: v,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureRow {
    pub agent: AgentType,
    pub log_return: f64,
    pub fraction_invested: f64,
    pub wealth_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct FigureTable {
    pub t_frac: f64,
    pub merton_ratio: f64,
    pub rows: Vec<FigureRow>,
}

/// One investment-level curve per agent (using each agent's current-period
/// law, i.e. the first-period law of its plan) plus the Merton reference.
pub fn emit_figure_data(
    agents: &[AgentType],
    t_frac: f64,
    log_return_grid: &[f64],
    model: &ValidatedModel,
) -> Result<FigureTable> {
    let constants = agent_constants(model)?;
    let mut rows = Vec::with_capacity(agents.len() * log_return_grid.len());
    for &agent in agents {
        let plan = strategy_plan(agent, &constants, model)?;
        let pts = investment_level(&plan.first_period_law, t_frac, log_return_grid, model)?;
        rows.extend(pts.into_iter().map(|p| FigureRow {
            agent,
            log_return: p.log_return,
            fraction_invested: p.fraction_invested,
            wealth_ratio: p.wealth_ratio,
        }));
    }
    Ok(FigureTable {
        t_frac,
        merton_ratio: merton_ratio(model),
        rows,
    })
}
