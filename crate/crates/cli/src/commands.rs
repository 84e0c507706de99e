//! The four subcommands. Every command's output is a pure function of
//! (config, seed); sweeps fan out over a worker pool with order-restoring
//! assembly.

use rayon::prelude::*;
use serde_json::Value;

use pp_core::agents;
use pp_core::fixed_point::{self, AgentConstants};
use pp_core::one_period;
use pp_core::{kernel_law, validate_with, Error, Tolerances, ValidatedModel};

use crate::config::{RunConfig, SweepConfig};
use crate::output::{csv_num, csv_opt, json_f64, json_opt, obj};

#[derive(Debug)]
pub enum CliError {
    /// Invalid input: bad config, bad parameters (exit 2).
    Input(String),
    /// Solver failure: non-convergence or a violated residual (exit 3).
    Solver(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::DegenerateMarket | Error::IllPosed { .. } => {
                CliError::Input(e.to_string())
            }
            other => CliError::Solver(other.to_string()),
        }
    }
}

pub struct CmdOut {
    pub stdout: String,
    /// Exit-worthy failure after partial output (sweep rows may fail).
    pub failure: Option<CliError>,
}

impl CmdOut {
    fn ok(stdout: String) -> Self {
        CmdOut {
            stdout,
            failure: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

pub fn build_model(config: &RunConfig, tol: Tolerances) -> Result<ValidatedModel, CliError> {
    Ok(validate_with(config.market, config.preferences, tol)?)
}

struct Orderings {
    sign_a_my: i32,
    ordering_ok: bool,
    beta_hat_in_range: bool,
}

/// Risk-profile comparisons per the sign of the myopic coefficient, with a
/// 1e-8 tolerance on gaps reported as strict.
fn orderings(c: &AgentConstants) -> Orderings {
    const TOL: f64 = 1e-8;
    let beta = c.beta;
    let ba = beta * c.a_exp;
    if c.a_my > TOL {
        let ok = c.a_so > -TOL && c.a_so < ba + TOL && ba < c.a_exp + TOL;
        let bh = c.beta_hat.map(|b| b > 0.0 && b < beta + TOL).unwrap_or(false);
        Orderings {
            sign_a_my: 1,
            ordering_ok: ok,
            beta_hat_in_range: bh,
        }
    } else if c.a_my < -TOL {
        let ok = c.a_exp < c.a_so + TOL && c.a_so <= ba + TOL && ba < TOL;
        let bh = c
            .beta_hat
            .map(|b| b >= beta - TOL && b < 1.0)
            .unwrap_or(false);
        Orderings {
            sign_a_my: -1,
            ordering_ok: ok,
            beta_hat_in_range: bh,
        }
    } else {
        let ok = c.a_exp.abs() <= TOL && c.a_so.abs() <= TOL;
        Orderings {
            sign_a_my: 0,
            ordering_ok: ok,
            beta_hat_in_range: true,
        }
    }
}

pub fn cmd_solve(config: &RunConfig, tol: Tolerances, format: Format) -> Result<CmdOut, CliError> {
    let model = build_model(config, tol)?;
    let constants = fixed_point::agent_constants(&model).map_err(CliError::from)?;
    let ord = orderings(&constants);

    let mut agent_objs: Vec<(&str, Value)> = Vec::new();
    let mut agent_rows = Vec::new();
    for &agent in &config.agents {
        let strat = agents::strategy_for(agent);
        let (t_first, t_steady) = strat.thetas(&constants);
        let plan = strat.plan(&constants, &model).map_err(CliError::from)?;
        let report = agents::value_check(&plan, &model).map_err(CliError::from)?;
        let residuals: Vec<(&str, Value)> = report
            .residuals
            .iter()
            .map(|(eq, r)| (eq.as_str(), json_f64(*r)))
            .collect();
        let residuals: Vec<(&str, Value)> = residuals;
        agent_rows.push(format!(
            "agent_residual,{},{}",
            agent.name(),
            csv_num(report.max_residual())
        ));
        agent_objs.push((
            agent.name(),
            obj(vec![
                ("first_theta", json_f64(t_first)),
                ("steady_theta", json_f64(t_steady)),
                (
                    "first_kind",
                    Value::String(plan.first_period_law.kind().name().into()),
                ),
                (
                    "steady_kind",
                    Value::String(plan.steady_law.kind().name().into()),
                ),
                ("max_residual", json_f64(report.max_residual())),
                ("residuals", obj(residuals)),
            ]),
        ));
    }

    if format == Format::Csv {
        let mut lines = vec!["key,value".to_string()];
        for (k, v) in [
            ("phi", model.phi),
            ("h", model.h),
            ("e_h_tau", model.e_h_tau),
            ("contraction_modulus", model.contraction_modulus),
            ("merton_ratio", agents::merton_ratio(&model)),
            ("theta_lower", constants.theta_lower),
            ("a_my", constants.a_my),
            ("a_exp", constants.a_exp),
            ("a_pre", constants.a_pre),
            ("a_so", constants.a_so),
            ("xi_hat", constants.xi_hat),
        ] {
            lines.push(format!("{k},{}", csv_num(v)));
        }
        lines.push(format!("beta_hat,{}", csv_opt(constants.beta_hat)));
        lines.push(format!("xi_lower,{}", csv_opt(constants.xi_lower)));
        lines.push(format!("h_lower_bar,{}", csv_opt(constants.h_lower_bar)));
        lines.push(format!("g_branch,{}", constants.g_solve.branch.name()));
        lines.push(format!("sign_a_my,{}", ord.sign_a_my));
        lines.push(format!("ordering_ok,{}", ord.ordering_ok));
        lines.push(format!("beta_hat_in_range,{}", ord.beta_hat_in_range));
        lines.extend(agent_rows);
        return Ok(CmdOut::ok(lines.join("\n") + "\n"));
    }

    let corner_mix = constants
        .corner_mix
        .map(|cm| {
            obj(vec![
                ("payout", json_f64(cm.payout)),
                ("threshold_eta", json_f64(cm.threshold_eta)),
                ("prob_payout", json_f64(cm.prob_payout)),
            ])
        })
        .unwrap_or(Value::Null);

    let doc = obj(vec![
        (
            "model",
            obj(vec![
                ("phi", json_f64(model.phi)),
                ("h", json_f64(model.h)),
                ("e_h_tau", json_f64(model.e_h_tau)),
                ("contraction_modulus", json_f64(model.contraction_modulus)),
                ("merton_ratio", json_f64(agents::merton_ratio(&model))),
                ("theta_lower", json_f64(constants.theta_lower)),
            ]),
        ),
        (
            "constants",
            obj(vec![
                ("a_my", json_f64(constants.a_my)),
                ("a_exp", json_f64(constants.a_exp)),
                ("a_pre", json_f64(constants.a_pre)),
                ("a_so", json_f64(constants.a_so)),
                ("beta_hat", json_opt(constants.beta_hat)),
                ("xi_hat", json_f64(constants.xi_hat)),
                ("xi_lower", json_opt(constants.xi_lower)),
                ("h_lower_bar", json_opt(constants.h_lower_bar)),
            ]),
        ),
        (
            "orderings",
            obj(vec![
                ("sign_a_my", Value::from(ord.sign_a_my)),
                ("ordering_ok", Value::from(ord.ordering_ok)),
                ("beta_hat_in_range", Value::from(ord.beta_hat_in_range)),
            ]),
        ),
        ("corner_mix", corner_mix),
        ("agents", obj(agent_objs)),
        (
            "diagnostics",
            obj(vec![
                (
                    "theta_star_my",
                    obj(vec![
                        ("iterations", Value::from(constants.my_solve.iterations)),
                        ("final_step", json_f64(constants.my_solve.final_step)),
                        ("max_step_ratio", json_f64(constants.my_solve.max_step_ratio)),
                    ]),
                ),
                (
                    "theta_star_exp",
                    obj(vec![
                        ("iterations", Value::from(constants.exp_solve.iterations)),
                        ("final_step", json_f64(constants.exp_solve.final_step)),
                        ("max_step_ratio", json_f64(constants.exp_solve.max_step_ratio)),
                    ]),
                ),
                (
                    "g_solve",
                    obj(vec![
                        ("branch", Value::String(constants.g_solve.branch.name().into())),
                        ("residual", json_f64(constants.g_solve.residual)),
                        (
                            "fixed_points",
                            Value::Array(
                                constants
                                    .g_solve
                                    .fixed_points
                                    .iter()
                                    .map(|x| json_f64(*x))
                                    .collect(),
                            ),
                        ),
                    ]),
                ),
            ]),
        ),
    ]);
    Ok(CmdOut::ok(
        serde_json::to_string_pretty(&doc).expect("json") + "\n",
    ))
}

pub const SWEEP_HEADER: &str =
    "param,value,status,a_my,a_exp,a_pre,a_so,beta_hat,xi_hat,beta_a_exp,ordering_ok";

pub fn cmd_sweep(
    config: &RunConfig,
    sweep: &SweepConfig,
    tol: Tolerances,
    format: Format,
) -> Result<CmdOut, CliError> {
    // validate the base model up front so config errors exit 2
    build_model(config, tol)?;
    let rows: Vec<(f64, Result<AgentConstants, Error>)> = sweep
        .grid
        .par_iter()
        .map(|&v| {
            let pref = sweep.param.apply(&config.preferences, v);
            let constants = validate_with(config.market, pref, tol)
                .and_then(|m| fixed_point::agent_constants(&m));
            (v, constants)
        })
        .collect();

    let mut failed = false;
    match format {
        Format::Csv => {
            let mut lines = vec![SWEEP_HEADER.to_string()];
            for (v, res) in &rows {
                match res {
                    Ok(c) => {
                        let ord = orderings(c);
                        lines.push(format!(
                            "{},{},ok,{},{},{},{},{},{},{},{}",
                            sweep.param.name(),
                            csv_num(*v),
                            csv_num(c.a_my),
                            csv_num(c.a_exp),
                            csv_num(c.a_pre),
                            csv_num(c.a_so),
                            csv_opt(c.beta_hat),
                            csv_num(c.xi_hat),
                            csv_num(c.beta * c.a_exp),
                            ord.ordering_ok,
                        ));
                    }
                    Err(e) => {
                        failed = true;
                        let msg = e.to_string().replace(',', ";");
                        lines.push(format!(
                            "{},{},error: {msg},,,,,,,,",
                            sweep.param.name(),
                            csv_num(*v),
                        ));
                    }
                }
            }
            Ok(CmdOut {
                stdout: lines.join("\n") + "\n",
                failure: failed.then(|| CliError::Solver("one or more sweep points failed".into())),
            })
        }
        Format::Json => {
            let arr: Vec<Value> = rows
                .iter()
                .map(|(v, res)| match res {
                    Ok(c) => {
                        let ord = orderings(c);
                        obj(vec![
                            ("param", Value::String(sweep.param.name().into())),
                            ("value", json_f64(*v)),
                            ("status", Value::String("ok".into())),
                            ("a_my", json_f64(c.a_my)),
                            ("a_exp", json_f64(c.a_exp)),
                            ("a_pre", json_f64(c.a_pre)),
                            ("a_so", json_f64(c.a_so)),
                            ("beta_hat", json_opt(c.beta_hat)),
                            ("xi_hat", json_f64(c.xi_hat)),
                            ("beta_a_exp", json_f64(c.beta * c.a_exp)),
                            ("ordering_ok", Value::from(ord.ordering_ok)),
                        ])
                    }
                    Err(e) => {
                        failed = true;
                        obj(vec![
                            ("param", Value::String(sweep.param.name().into())),
                            ("value", json_f64(*v)),
                            ("status", Value::String(format!("error: {e}"))),
                        ])
                    }
                })
                .collect();
            Ok(CmdOut {
                stdout: serde_json::to_string_pretty(&Value::Array(arr)).expect("json") + "\n",
                failure: failed.then(|| CliError::Solver("one or more sweep points failed".into())),
            })
        }
    }
}

pub const CURVE_HEADER: &str = "agent,log_return,fraction_invested";

pub fn cmd_curve(config: &RunConfig, tol: Tolerances, format: Format) -> Result<CmdOut, CliError> {
    let model = build_model(config, tol)?;
    let grid = config.curve.grid();
    if grid.is_empty() {
        return Err(CliError::Input("curve grid must be nonempty".into()));
    }
    if !(0.0..1.0).contains(&config.curve.t_frac) {
        return Err(CliError::Input(format!(
            "t_frac must lie in [0,1), got {}",
            config.curve.t_frac
        )));
    }
    let table = agents::emit_figure_data(&config.agents, config.curve.t_frac, &grid, &model)
        .map_err(CliError::from)?;
    match format {
        Format::Csv => {
            let mut lines = vec![
                format!("# merton_ratio = {}", csv_num(table.merton_ratio)),
                CURVE_HEADER.to_string(),
            ];
            for row in &table.rows {
                lines.push(format!(
                    "{},{},{}",
                    row.agent.name(),
                    csv_num(row.log_return),
                    csv_num(row.fraction_invested),
                ));
            }
            Ok(CmdOut::ok(lines.join("\n") + "\n"))
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| {
                    obj(vec![
                        ("agent", Value::String(r.agent.name().into())),
                        ("log_return", json_f64(r.log_return)),
                        ("fraction_invested", json_f64(r.fraction_invested)),
                    ])
                })
                .collect();
            let doc = obj(vec![
                ("merton_ratio", json_f64(table.merton_ratio)),
                ("t_frac", json_f64(table.t_frac)),
                ("rows", Value::Array(rows)),
            ]);
            Ok(CmdOut::ok(
                serde_json::to_string_pretty(&doc).expect("json") + "\n",
            ))
        }
    }
}

pub const PATHS_HEADER: &str = "agent,path,terminal_wealth,ruined_at";

pub fn cmd_simulate(
    config: &RunConfig,
    tol: Tolerances,
    seed: u64,
) -> Result<(CmdOut, String), CliError> {
    let model = build_model(config, tol)?;
    let sim = &config.simulation;
    if sim.paths < 1 || sim.periods < 1 {
        return Err(CliError::Input(
            "simulation needs paths >= 1 and periods >= 1".into(),
        ));
    }
    let constants = fixed_point::agent_constants(&model).map_err(CliError::from)?;
    let kernel = kernel_law(&model, model.market.tau).map_err(CliError::from)?;

    let mut agent_objs = Vec::new();
    let mut paths_csv = vec![PATHS_HEADER.to_string()];
    for &agent in &config.agents {
        let plan = agents::strategy_plan(agent, &constants, &model).map_err(CliError::from)?;
        let stats = agents::simulate_wealth(&plan, sim.x0, sim.periods, sim.paths, seed, &model);
        let atom_of = |law: &pp_core::one_period::PayoffLaw| -> Result<f64, CliError> {
            Ok(kernel.expect(
                |z| if one_period::payoff_eval(law, z) == 0.0 { 1.0 } else { 0.0 },
                &law.breakpoints(),
            )?)
        };
        let atom_mass = atom_of(&plan.steady_law)?;
        let first_atom_mass = atom_of(&plan.first_period_law)?;
        let quantiles = obj(stats
            .terminal_quantiles
            .iter()
            .map(|(q, x)| (format!("p{:02}", (q * 100.0).round() as u32), json_f64(*x)))
            .collect());
        let per_period: Vec<Value> = stats
            .per_period
            .iter()
            .map(|p| {
                obj(vec![
                    ("mean_y", json_f64(p.mean_y)),
                    ("var_y", json_f64(p.var_y)),
                    ("zero_fraction", json_f64(p.zero_fraction)),
                ])
            })
            .collect();
        agent_objs.push((
            agent.name(),
            obj(vec![
                ("paths", Value::from(stats.paths)),
                ("periods", Value::from(stats.periods)),
                ("seed", Value::from(stats.seed)),
                ("x0", json_f64(stats.x0)),
                ("bankruptcy_frequency", json_f64(stats.bankruptcy_frequency)),
                ("ruin_rate_per_period", json_f64(stats.ruin_rate_per_period)),
                ("ruin_trials", Value::from(stats.ruin_trials)),
                ("steady_law_atom_mass", json_f64(atom_mass)),
                ("first_law_atom_mass", json_f64(first_atom_mass)),
                ("terminal_quantiles", quantiles),
                ("per_period", Value::Array(per_period)),
            ]),
        ));
        for (i, (w, r)) in stats
            .terminal_wealth
            .iter()
            .zip(&stats.ruined_at)
            .enumerate()
        {
            paths_csv.push(format!(
                "{},{},{},{}",
                agent.name(),
                i,
                csv_num(*w),
                r.map(|x| x.to_string()).unwrap_or_default()
            ));
        }
    }
    let doc = obj(vec![("agents", obj(agent_objs))]);
    Ok((
        CmdOut::ok(serde_json::to_string_pretty(&doc).expect("json") + "\n"),
        paths_csv.join("\n") + "\n",
    ))
}
