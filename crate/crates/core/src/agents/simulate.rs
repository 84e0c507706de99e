//! Multi-period wealth-path simulation with counter-based per-path streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::StrategyPlan;
use crate::market::{kernel_law, ValidatedModel};

/// Sample moments of the drawn gross returns at one period index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodMoments {
    pub mean_y: f64,
    pub var_y: f64,
    pub zero_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct WealthPathStats {
    pub paths: usize,
    pub periods: usize,
    pub seed: u64,
    pub x0: f64,
    pub per_period: Vec<PeriodMoments>,
    /// Fraction of paths sitting at zero after the final period.
    pub bankruptcy_frequency: f64,
    /// Conditional per-period ruin rate: transitions to zero divided by
    /// positive period-starts. Comparable to the law's ruin-atom mass.
    pub ruin_rate_per_period: f64,
    /// Number of positive period-starts behind the conditional rate.
    pub ruin_trials: usize,
    /// (probability, terminal wealth) pairs.
    pub terminal_quantiles: Vec<(f64, f64)>,
    /// Per-path terminal wealth, in path order.
    pub terminal_wealth: Vec<f64>,
    /// First period index at which each path hit zero, if it did.
    pub ruined_at: Vec<Option<u32>>,
}

const QUANTILES: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

fn path_seed(seed: u64, path: u64) -> [u8; 32] {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&path.to_le_bytes());
    bytes[16..24].copy_from_slice(&0x70617468u64.to_le_bytes());
    bytes
}

/// Simulates `paths` independent wealth paths over `periods` evaluation
/// periods. Each period draws one kernel ratio from its exact lognormal law
/// and applies the period's payoff law; the first period uses the plan's
/// first-period law and later periods its steady law. Per-path streams are
/// keyed by (seed, path index), so results are independent of scheduling,
/// and wealth enters only as the final scaling `x0 * prod(y)`.
pub fn simulate_wealth(
    plan: &StrategyPlan,
    x0: f64,
    periods: usize,
    paths: usize,
    seed: u64,
    model: &ValidatedModel,
) -> WealthPathStats {
    let kernel = kernel_law(model, model.market.tau).expect("tau > 0 in a validated model");
    let (m, s) = (kernel.log_mean, kernel.log_sd);
    let first = &plan.first_period_law;
    let steady = &plan.steady_law;

    let results: Vec<(Vec<f64>, f64, Option<u32>)> = (0..paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha12Rng::from_seed(path_seed(seed, p));
            let mut prod = 1.0f64;
            let mut ruined_at = None;
            let mut ys = Vec::with_capacity(periods);
            for i in 0..periods {
                let n: f64 = StandardNormal.sample(&mut rng);
                let z = (m + s * n).exp();
                let law = if i == 0 { first } else { steady };
                let y = law.eval(z);
                ys.push(y);
                if prod > 0.0 {
                    prod *= y;
                    if prod == 0.0 {
                        ruined_at = Some(i as u32);
                    }
                }
            }
            (ys, prod, ruined_at)
        })
        .collect();

    let mut per_period = Vec::with_capacity(periods);
    for i in 0..periods {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut zeros = 0usize;
        for (ys, _, _) in &results {
            let y = ys[i];
            sum += y;
            sum_sq += y * y;
            if y == 0.0 {
                zeros += 1;
            }
        }
        let n = paths as f64;
        let mean = sum / n;
        per_period.push(PeriodMoments {
            mean_y: mean,
            var_y: (sum_sq / n - mean * mean).max(0.0),
            zero_fraction: zeros as f64 / n,
        });
    }

    let mut transitions = 0usize;
    let mut trials = 0usize;
    let mut bankrupt = 0usize;
    for (_, prod, ruined_at) in &results {
        match ruined_at {
            Some(i) => {
                trials += *i as usize + 1;
                transitions += 1;
            }
            None => trials += periods,
        }
        if *prod == 0.0 {
            bankrupt += 1;
        }
    }

    let terminal_wealth: Vec<f64> = results.iter().map(|(_, p, _)| x0 * p).collect();
    let ruined_at: Vec<Option<u32>> = results.iter().map(|(_, _, r)| *r).collect();
    let mut sorted = terminal_wealth.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let terminal_quantiles = QUANTILES
        .iter()
        .map(|&q| {
            let idx = ((q * (paths.max(1) - 1) as f64).round() as usize).min(paths - 1);
            (q, sorted[idx])
        })
        .collect();

    WealthPathStats {
        paths,
        periods,
        seed,
        x0,
        per_period,
        bankruptcy_frequency: bankrupt as f64 / paths as f64,
        ruin_rate_per_period: if trials > 0 {
            transitions as f64 / trials as f64
        } else {
            0.0
        },
        ruin_trials: trials,
        terminal_quantiles,
        terminal_wealth,
        ruined_at,
    }
}
