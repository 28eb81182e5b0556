//! Selection bias in point processes: the densest union of inter-arrival
//! intervals with total length `s` that an observer can report.

use serde::{Deserialize, Serialize};

use crate::bound::{brs_bound, MixtureModel};
use crate::distributions::DistributionSpec;
use crate::error::{BrsError, Result};
use crate::oracle::greedy_count_in_place;
use crate::rng::replicate_rng;
use crate::root::bisect;

/// Upper end of the bisection bracket for the Poisson threshold.
const POISSON_BRACKET: f64 = 50.0;

/// Root of `e^{-t}(t + 1) = 1 - f` for rate-1 exponential gaps, `f = s/n`.
pub fn poisson_threshold(budget_fraction: f64) -> Result<f64> {
    if !(budget_fraction > 0.0 && budget_fraction < 1.0) {
        return Err(BrsError::InvalidFraction(budget_fraction));
    }
    let level = 1.0 - budget_fraction;
    let root = bisect(
        |t| (-t).exp() * (t + 1.0) - level,
        0.0,
        POISSON_BRACKET,
        200,
    )?;
    Ok(root.x)
}

/// `e^{-t}(t + 1)` on `steps + 1` evenly spaced points of `[0, t_max]`.
pub fn poisson_curve(t_max: f64, steps: usize) -> Vec<(f64, f64)> {
    (0..=steps)
        .map(|i| {
            let t = t_max * i as f64 / steps.max(1) as f64;
            (t, (-t).exp() * (t + 1.0))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBiasReport {
    pub n: u64,
    pub s: f64,
    pub t: f64,
    pub trivial: bool,
    /// `(Σ n_k F_k(t)) / s`.
    pub d_max_bound: f64,
    /// `n / Σ n_k E X_k`.
    pub true_rate: f64,
    pub inflation_factor: f64,
    /// Fewest points per unit time on the complementary set of expected
    /// length `E T_n - s`: `(n - Σ n_k F_k(t)) / (E T_n - s)`. Only
    /// asymptotically meaningful, and only for independent gaps.
    pub complement_min_density: Option<f64>,
}

/// Bound on the expected maximal density over interval selections of total
/// length `s`, for gaps distributed per `model`.
pub fn max_density_bound(model: &MixtureModel, s: f64) -> Result<DensityBiasReport> {
    let report = brs_bound(model, s)?;
    let n = model.total_count();
    let expected_horizon = model.total_mean()?;
    let true_rate = n as f64 / expected_horizon;
    let d_max_bound = report.bound / s;
    let complement_min_density = (expected_horizon > s && !report.solution.trivial)
        .then(|| (n as f64 - report.bound) / (expected_horizon - s));
    Ok(DensityBiasReport {
        n,
        s,
        t: report.solution.t,
        trivial: report.solution.trivial,
        d_max_bound,
        true_rate,
        inflation_factor: d_max_bound / true_rate,
        complement_min_density,
    })
}

/// One realization of `N(n, s) / s` with `s = budget_fraction · n` and `n`
/// iid gaps from `dist`.
pub fn simulate_condensed_density(
    dist: &DistributionSpec,
    n: usize,
    budget_fraction: f64,
    seed: u64,
) -> Result<f64> {
    dist.validate()?;
    if n == 0 {
        return Err(BrsError::InvalidParameter("n must be positive".into()));
    }
    if !(budget_fraction > 0.0) {
        return Err(BrsError::InvalidFraction(budget_fraction));
    }
    let mean = dist.total_mean()?;
    if budget_fraction >= mean {
        return Err(BrsError::TrivialRegime {
            budget: budget_fraction,
            total_mean: mean,
        });
    }
    let s = budget_fraction * n as f64;
    let mut rng = replicate_rng(seed, 0);
    let mut gaps: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let (count, _) = greedy_count_in_place(&mut gaps, s);
    Ok(count as f64 / s)
}
