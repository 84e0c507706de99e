//! Agent-level strategies: each agent type is a strategy behind a common
//! trait, registered by name and selected at runtime. A strategy assembles a
//! plan of one-period payoff laws from the solved value constants; the plan
//! is then verified against its defining equations, simulated, or turned
//! into investment-level curves.

mod curve;
mod simulate;

pub use curve::{emit_figure_data, investment_level, merton_ratio, CurvePoint, FigureRow, FigureTable};
pub use simulate::{simulate_wealth, PeriodMoments, WealthPathStats};

use serde::{Deserialize, Serialize};

use crate::envelope;
use crate::error::{Error, Result};
use crate::fixed_point::{AgentConstants, GBranch};
use crate::market::{kernel_law, ValidatedModel};
use crate::one_period::{self, PayoffLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType {
    PreCommitting,
    Naive,
    Sophisticated,
    Exponential,
    Myopic,
}

impl AgentType {
    pub const ALL: [AgentType; 5] = [
        AgentType::PreCommitting,
        AgentType::Naive,
        AgentType::Sophisticated,
        AgentType::Exponential,
        AgentType::Myopic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AgentType::PreCommitting => "pre_committing",
            AgentType::Naive => "naive",
            AgentType::Sophisticated => "sophisticated",
            AgentType::Exponential => "exponential",
            AgentType::Myopic => "myopic",
        }
    }

    pub fn from_name(name: &str) -> Option<AgentType> {
        Self::ALL.iter().copied().find(|a| a.name() == name)
    }
}

impl std::fmt::Display for AgentType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A strategy plan: which law to follow in the first period and which in
/// every period after it.
#[derive(Debug, Clone)]
pub struct StrategyPlan {
    pub agent: AgentType,
    pub first_period_law: PayoffLaw,
    pub steady_law: PayoffLaw,
    pub constants: AgentConstants,
}

/// One agent type behind the common interface. Implementations only differ
/// in which continuation weights they endogenize (plus the corner override
/// of the sophisticated equilibrium).
pub trait Strategy: Send + Sync {
    fn agent_type(&self) -> AgentType;

    fn name(&self) -> &'static str {
        self.agent_type().name()
    }

    /// Continuation weights for (first period, all later periods).
    fn thetas(&self, constants: &AgentConstants) -> (f64, f64);

    fn plan(&self, constants: &AgentConstants, model: &ValidatedModel) -> Result<StrategyPlan> {
        let (t_first, t_steady) = self.thetas(constants);
        let first = one_period::solve_dual(t_first, model)?.law;
        let steady = if t_steady == t_first {
            first.clone()
        } else {
            one_period::solve_dual(t_steady, model)?.law
        };
        Ok(StrategyPlan {
            agent: self.agent_type(),
            first_period_law: first,
            steady_law: steady,
            constants: constants.clone(),
        })
    }
}

struct PreCommitting;
struct Naive;
struct Sophisticated;
struct Exponential;
struct Myopic;

impl Strategy for PreCommitting {
    fn agent_type(&self) -> AgentType {
        AgentType::PreCommitting
    }
    fn thetas(&self, c: &AgentConstants) -> (f64, f64) {
        (c.beta * c.a_exp, c.a_exp)
    }
}

impl Strategy for Naive {
    fn agent_type(&self) -> AgentType {
        AgentType::Naive
    }
    fn thetas(&self, c: &AgentConstants) -> (f64, f64) {
        let t = c.beta * c.a_exp;
        (t, t)
    }
}

impl Strategy for Sophisticated {
    fn agent_type(&self) -> AgentType {
        AgentType::Sophisticated
    }
    fn thetas(&self, c: &AgentConstants) -> (f64, f64) {
        (c.a_so, c.a_so)
    }
    fn plan(&self, constants: &AgentConstants, model: &ValidatedModel) -> Result<StrategyPlan> {
        let law = if constants.g_solve.branch == GBranch::CornerDigital {
            one_period::digital_law(constants.xi_hat, model)?
        } else {
            one_period::solve_dual(constants.a_so, model)?.law
        };
        Ok(StrategyPlan {
            agent: AgentType::Sophisticated,
            first_period_law: law.clone(),
            steady_law: law,
            constants: constants.clone(),
        })
    }
}

impl Strategy for Exponential {
    fn agent_type(&self) -> AgentType {
        AgentType::Exponential
    }
    fn thetas(&self, c: &AgentConstants) -> (f64, f64) {
        (c.a_exp, c.a_exp)
    }
}

impl Strategy for Myopic {
    fn agent_type(&self) -> AgentType {
        AgentType::Myopic
    }
    fn thetas(&self, _: &AgentConstants) -> (f64, f64) {
        (0.0, 0.0)
    }
}

static REGISTRY: [&dyn Strategy; 5] = [
    &PreCommitting,
    &Naive,
    &Sophisticated,
    &Exponential,
    &Myopic,
];

/// All registered strategies.
pub fn registry() -> &'static [&'static dyn Strategy] {
    &REGISTRY
}

/// Looks a strategy up by its registered name.
pub fn strategy_by_name(name: &str) -> Option<&'static dyn Strategy> {
    REGISTRY.iter().copied().find(|s| s.name() == name)
}

pub fn strategy_for(agent: AgentType) -> &'static dyn Strategy {
    REGISTRY
        .iter()
        .copied()
        .find(|s| s.agent_type() == agent)
        .expect("every agent type is registered")
}

/// Assembles the plan for one agent type.
pub fn strategy_plan(
    agent: AgentType,
    constants: &AgentConstants,
    model: &ValidatedModel,
) -> Result<StrategyPlan> {
    strategy_for(agent).plan(constants, model)
}

/// Residuals of the dynamic-programming equations a plan must satisfy.
#[derive(Debug, Clone)]
pub struct ValueCheckReport {
    pub residuals: Vec<(String, f64)>,
}

impl ValueCheckReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|(_, r)| r.abs()).fold(0.0, f64::max)
    }
}

const VALUE_CHECK_TOL: f64 = 1e-8;

/// Re-evaluates each defining equation with the plan's laws by quadrature.
/// Fails with the offending equation when any residual exceeds 1e-8.
pub fn value_check(plan: &StrategyPlan, model: &ValidatedModel) -> Result<ValueCheckReport> {
    let pref = model.pref;
    let edt = (-pref.delta * model.market.tau).exp();
    let kernel = kernel_law(model, model.market.tau)?;
    let c = &plan.constants;
    let beta = pref.beta;

    let value_under = |law: &PayoffLaw, weight: f64| -> Result<f64> {
        kernel.expect(
            |z| envelope::f_raw(law.eval(z), weight, &pref),
            &law.breakpoints(),
        )
    };

    let mut residuals = Vec::new();
    match plan.agent {
        AgentType::Exponential => {
            residuals.push((
                "exponential fixed point".to_string(),
                c.a_exp - edt * value_under(&plan.steady_law, c.a_exp)?,
            ));
            residuals.push((
                "exponential optimality".to_string(),
                c.a_exp - edt * one_period::phi(c.a_exp, model)?,
            ));
        }
        AgentType::PreCommitting => {
            residuals.push((
                "pre-commitment first-period value".to_string(),
                c.a_pre - edt * value_under(&plan.first_period_law, beta * c.a_exp)?,
            ));
            residuals.push((
                "exponential fixed point".to_string(),
                c.a_exp - edt * value_under(&plan.steady_law, c.a_exp)?,
            ));
            residuals.push((
                "pre-commitment optimality".to_string(),
                c.a_pre - edt * one_period::phi(beta * c.a_exp, model)?,
            ));
        }
        AgentType::Naive => {
            residuals.push((
                "naive per-period value".to_string(),
                c.a_pre - edt * value_under(&plan.steady_law, beta * c.a_exp)?,
            ));
        }
        AgentType::Sophisticated => {
            let a_hat = c.g_solve.a_hat;
            let moment = kernel.expect(
                |z| plan.steady_law.eval(z).powf(pref.alpha),
                &plan.steady_law.breakpoints(),
            )?;
            residuals.push(("sophisticated moment consistency".to_string(), moment - c.xi_hat));
            residuals.push((
                "sophisticated equilibrium value".to_string(),
                a_hat - edt * value_under(&plan.steady_law, c.a_so)?,
            ));
            residuals.push((
                "sophisticated optimality".to_string(),
                a_hat - edt * one_period::phi(c.a_so, model)?,
            ));
        }
        AgentType::Myopic => {
            residuals.push((
                "myopic value".to_string(),
                c.a_my - edt * value_under(&plan.steady_law, 0.0)?,
            ));
        }
    }

    let report = ValueCheckReport { residuals };
    if let Some((eq, r)) = report
        .residuals
        .iter()
        .find(|(_, r)| r.abs() > VALUE_CHECK_TOL)
    {
        return Err(Error::ToleranceViolation {
            equation: eq.clone(),
            residual: r.abs(),
            limit: VALUE_CHECK_TOL,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_point::agent_constants;
    use crate::market::{validate, MarketParams, PreferenceParams};
    use crate::one_period::LawKind;
    use approx::assert_abs_diff_eq;

    fn model(gamma: f64, beta: f64) -> ValidatedModel {
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

    #[test]
    fn registry_is_complete_and_named() {
        assert_eq!(registry().len(), 5);
        for agent in AgentType::ALL {
            let s = strategy_by_name(agent.name()).expect("registered");
            assert_eq!(s.agent_type(), agent);
            assert_eq!(AgentType::from_name(agent.name()), Some(agent));
        }
        assert!(strategy_by_name("martingale").is_none());
    }

    #[test]
    fn plan_weights_and_degeneracies() {
        // beta = 1: every non-myopic strategy plays the exponential weights
        let m = model(1.0, 1.0);
        let c = agent_constants(&m).unwrap();
        for agent in [
            AgentType::PreCommitting,
            AgentType::Naive,
            AgentType::Sophisticated,
            AgentType::Exponential,
        ] {
            let (first, steady) = strategy_for(agent).thetas(&c);
            assert_abs_diff_eq!(first, c.a_exp, epsilon = 1e-8);
            assert_abs_diff_eq!(steady, c.a_exp, epsilon = 1e-8);
        }

        // beta = 0: the naive plan degenerates to the myopic one
        let m = model(1.0, 0.0);
        let c = agent_constants(&m).unwrap();
        let (first, steady) = strategy_for(AgentType::Naive).thetas(&c);
        assert_eq!(first, 0.0);
        assert_eq!(steady, 0.0);
        let plan = strategy_plan(AgentType::Naive, &c, &m).unwrap();
        let myopic = strategy_plan(AgentType::Myopic, &c, &m).unwrap();
        for z in [0.3, 0.9, 1.4, 2.2] {
            assert_eq!(plan.steady_law.eval(z), myopic.steady_law.eval(z));
        }

        // on the gamma = 1 figure set the pre-committing first period is
        // strictly more present-biased than its steady state
        let m = model(1.0, 0.4);
        let c = agent_constants(&m).unwrap();
        let (first, steady) = strategy_for(AgentType::PreCommitting).thetas(&c);
        assert!(first < steady);
        let plan = strategy_plan(AgentType::PreCommitting, &c, &m).unwrap();
        assert_eq!(plan.first_period_law.kind(), LawKind::TwoBranch);
        assert_eq!(plan.steady_law.kind(), LawKind::TwoBranch);
        assert!(plan.first_period_law.theta() < plan.steady_law.theta());
    }
}
