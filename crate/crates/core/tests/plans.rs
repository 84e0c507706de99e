//! Cross-module checks of assembled strategy plans: the dynamic-programming
//! residuals for every agent on both figure parameter sets and the corner
//! regime, plus Monte-Carlo moment agreement in the exponential benchmark.

use pp_core::agents::{self, AgentType};
use pp_core::fixed_point::agent_constants;
use pp_core::market::{kernel_law, validate, MarketParams, PreferenceParams};
use pp_core::one_period::LawKind;
use pp_core::ValidatedModel;

fn model(gamma: f64, delta: f64, beta: f64) -> ValidatedModel {
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
            delta,
            beta,
        },
    )
    .unwrap()
}

#[test]
fn value_checks_pass_for_all_agents_on_both_figure_sets() {
    for gamma in [1.0, 2.5] {
        let m = model(gamma, 0.3, 0.4);
        let constants = agent_constants(&m).unwrap();
        for agent in AgentType::ALL {
            let plan = agents::strategy_plan(agent, &constants, &m).unwrap();
            let report = agents::value_check(&plan, &m)
                .unwrap_or_else(|e| panic!("gamma={gamma} {agent}: {e}"));
            assert!(
                report.max_residual() <= 1e-8,
                "gamma={gamma} {agent}: residual {}",
                report.max_residual()
            );
        }
    }
}

#[test]
fn corner_equilibrium_plan_is_digital_and_verifies() {
    let m = model(4.0, 0.2, 0.7);
    let constants = agent_constants(&m).unwrap();
    let plan = agents::strategy_plan(AgentType::Sophisticated, &constants, &m).unwrap();
    assert_eq!(plan.steady_law.kind(), LawKind::Digital);
    let report = agents::value_check(&plan, &m).unwrap();
    assert!(report.max_residual() <= 1e-8, "residual {}", report.max_residual());
    // the digital mix reproduces the equilibrium moment
    let kernel = kernel_law(&m, 1.0).unwrap();
    let moment = kernel
        .expect(
            |z| plan.steady_law.eval(z).sqrt(),
            &plan.steady_law.breakpoints(),
        )
        .unwrap();
    assert!((moment - constants.xi_hat).abs() <= 1e-9);
    // the remaining agents still verify in this regime
    for agent in [AgentType::Exponential, AgentType::Naive, AgentType::Myopic] {
        let plan = agents::strategy_plan(agent, &constants, &m).unwrap();
        agents::value_check(&plan, &m).unwrap();
    }
}

/// In the exponential benchmark the simulated per-period gross returns must
/// match the law's quadrature moments within Monte-Carlo error.
#[test]
fn simulated_moments_match_quadrature_in_the_exponential_benchmark() {
    let m = model(1.0, 0.3, 1.0);
    let constants = agent_constants(&m).unwrap();
    let plan = agents::strategy_plan(AgentType::Exponential, &constants, &m).unwrap();
    let kernel = kernel_law(&m, 1.0).unwrap();
    let law = &plan.steady_law;
    let breaks = law.breakpoints();
    let mean = kernel.expect(|z| law.eval(z), &breaks).unwrap();
    let second = kernel.expect(|z| law.eval(z).powi(2), &breaks).unwrap();
    let var = second - mean * mean;

    let paths = 40_000;
    let periods = 6;
    let stats = agents::simulate_wealth(&plan, 1.0, periods, paths, 2024, &m);
    let n = (paths * periods) as f64;
    let pooled_mean = stats.per_period.iter().map(|p| p.mean_y).sum::<f64>() / periods as f64;
    let se_mean = (var / n).sqrt();
    assert!(
        (pooled_mean - mean).abs() <= 3.0 * se_mean,
        "mean {pooled_mean} vs {mean} (se {se_mean})"
    );
    let pooled_var = stats.per_period.iter().map(|p| p.var_y).sum::<f64>() / periods as f64;
    // crude standard error for the variance via the fourth moment
    let fourth = kernel.expect(|z| law.eval(z).powi(4), &breaks).unwrap();
    let se_var = ((fourth - second * second) / n).sqrt();
    assert!(
        (pooled_var - var).abs() <= 4.0 * se_var,
        "var {pooled_var} vs {var} (se {se_var})"
    );
}
