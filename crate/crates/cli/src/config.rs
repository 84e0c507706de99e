//! Run configuration: JSON in, validated model out.

use serde::{Deserialize, Serialize};

use pp_core::agents::AgentType;
use pp_core::{MarketParams, PreferenceParams, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Beta,
    Gamma,
    K,
    Delta,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Beta => "beta",
            SweepParam::Gamma => "gamma",
            SweepParam::K => "k",
            SweepParam::Delta => "delta",
        }
    }

    pub fn parse(s: &str) -> Option<SweepParam> {
        match s {
            "beta" => Some(SweepParam::Beta),
            "gamma" => Some(SweepParam::Gamma),
            "k" => Some(SweepParam::K),
            "delta" => Some(SweepParam::Delta),
            _ => None,
        }
    }

    pub fn apply(&self, pref: &PreferenceParams, value: f64) -> PreferenceParams {
        let mut p = *pref;
        match self {
            SweepParam::Beta => p.beta = value,
            SweepParam::Gamma => p.gamma = value,
            SweepParam::K => p.k = value,
            SweepParam::Delta => p.delta = value,
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveConfig {
    pub t_frac: f64,
    pub log_return_min: f64,
    pub log_return_max: f64,
    pub points: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            t_frac: 0.5,
            log_return_min: -0.5,
            log_return_max: 0.5,
            points: 201,
        }
    }
}

impl CurveConfig {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.points.max(1);
        (0..n)
            .map(|i| {
                if n == 1 {
                    self.log_return_min
                } else {
                    self.log_return_min
                        + (self.log_return_max - self.log_return_min) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub x0: f64,
    pub periods: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            x0: 1.0,
            periods: 20,
            paths: 100_000,
            seed: 42,
        }
    }
}

fn default_agents() -> Vec<AgentType> {
    AgentType::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketParams,
    pub preferences: PreferenceParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_agents")]
    pub agents: Vec<AgentType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub curve: CurveConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }
}
