//! Threshold equation `Σ n_k M_k(t) = s` and the ladder of expected-count
//! bounds built on it.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{BrsError, Result};
use crate::root::brent;

/// Residual tolerance, scaled by `max(1, s)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 200;
/// Upper-end doublings tried before giving up on an unbounded family.
const MAX_DOUBLINGS: usize = 1100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub count: u64,
    #[serde(flatten)]
    pub dist: DistributionSpec,
}

/// Groups of variables sharing a marginal law: `n_k` copies of `F_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub components: Vec<Component>,
}

impl MixtureModel {
    pub fn new(components: Vec<(u64, DistributionSpec)>) -> Result<Self> {
        let model = Self {
            components: components
                .into_iter()
                .map(|(count, dist)| Component { count, dist })
                .collect(),
        };
        model.validate()?;
        Ok(model)
    }

    /// `n` copies of a single law.
    pub fn iid(n: u64, dist: DistributionSpec) -> Result<Self> {
        Self::new(vec![(n, dist)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(BrsError::Empty("mixture model has no components"));
        }
        for c in &self.components {
            if c.count == 0 {
                return Err(BrsError::InvalidParameter(format!(
                    "component {} has zero count",
                    c.dist.family()
                )));
            }
            c.dist.validate()?;
        }
        Ok(())
    }

    pub fn total_count(&self) -> u64 {
        self.components.iter().map(|c| c.count).sum()
    }

    /// `Σ n_k E X_k`; the budget at which the bound becomes trivial.
    pub fn total_mean(&self) -> Result<f64> {
        self.components
            .iter()
            .map(|c| Ok(c.count as f64 * c.dist.total_mean()?))
            .sum()
    }

    pub fn support_sup(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.dist.support_sup())
            .fold(0.0, f64::max)
    }

    /// `G(t) = Σ n_k M_k(t)`.
    pub fn moment_sum(&self, t: f64) -> Result<f64> {
        self.components
            .iter()
            .map(|c| Ok(c.count as f64 * c.dist.truncated_mean(t)?))
            .sum()
    }

    /// `Σ n_k F_k(t)`.
    pub fn cdf_sum(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.count as f64 * c.dist.cdf(t))
            .sum()
    }

    /// Rescales every law by `c` (`X → cX`).
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|comp| Component {
                    count: comp.count,
                    dist: comp.dist.scaled(c),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution {
    pub t: f64,
    /// `G(t) - s`.
    pub equation_residual: f64,
    /// Set when `s` is at or above the total mean; `t` is then the support supremum.
    pub trivial: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub solution: ThresholdSolution,
    /// Total count `n = Σ n_k`.
    pub n: u64,
    pub bound: f64,
    pub per_component: Vec<f64>,
}

fn check_budget(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(BrsError::InvalidBudget(s))
    }
}

/// Solves `Σ n_k ∫_0^t x dF_k(x) = s` for `t`.
///
/// The bracket starts at `[0, 1]` and the upper end doubles until the moment
/// sum reaches `s`, clipped at the support supremum. Brent iteration then
/// runs to machine precision in `t`.
pub fn solve_brs_equation(model: &MixtureModel, s: f64) -> Result<ThresholdSolution> {
    check_budget(s)?;
    model.validate()?;
    let total = model.total_mean()?;
    if s >= total {
        return Ok(ThresholdSolution {
            t: model.support_sup(),
            equation_residual: total - s,
            trivial: true,
            iterations: 0,
        });
    }

    let sup = model.support_sup();
    let (mut lo, mut hi) = (0.0, 1.0_f64.min(sup));
    let mut doublings = 0;
    while model.moment_sum(hi)? < s {
        if hi >= sup {
            // the moment sum at the supremum is the total mean, which exceeds s
            return Err(BrsError::NoConvergence {
                iterations: doublings,
                residual: model.moment_sum(hi)? - s,
            });
        }
        lo = hi;
        hi = (2.0 * hi).min(sup);
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(BrsError::NoConvergence {
                iterations: doublings,
                residual: model.moment_sum(hi)? - s,
            });
        }
    }

    let failure: Cell<Option<BrsError>> = Cell::new(None);
    let root = brent(
        |t| match model.moment_sum(t) {
            Ok(g) => g - s,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        },
        lo,
        hi,
        0.0,
        MAX_ITERATIONS,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let root = root?;
    let residual = model.moment_sum(root.x)? - s;
    if residual.abs() > RESIDUAL_TOLERANCE * s.max(1.0) {
        return Err(BrsError::NoConvergence {
            iterations: root.iterations,
            residual,
        });
    }
    Ok(ThresholdSolution {
        t: root.x,
        equation_residual: residual,
        trivial: false,
        iterations: root.iterations + doublings,
    })
}

/// `E N(n,s) ≤ Σ n_k F_k(t)`.
pub fn brs_bound(model: &MixtureModel, s: f64) -> Result<BoundReport> {
    let solution = solve_brs_equation(model, s)?;
    let per_component: Vec<f64> = if solution.trivial {
        model.components.iter().map(|c| c.count as f64).collect()
    } else {
        model
            .components
            .iter()
            .map(|c| c.count as f64 * c.dist.cdf(solution.t))
            .collect()
    };
    let bound = per_component.iter().sum();
    Ok(BoundReport {
        solution,
        n: model.total_count(),
        bound,
        per_component,
    })
}

impl BoundReport {
    /// Subtracts the expected unspent budget divided by `t`.
    ///
    /// In the trivial regime the moment identity behind the residual term does
    /// not hold, and the bound `n` is returned unchanged.
    pub fn refined(&self, s: f64, expected_selected_sum: f64) -> Result<f64> {
        check_budget(s)?;
        if !(expected_selected_sum >= 0.0 && expected_selected_sum <= s) {
            return Err(BrsError::InvalidResidual {
                expected: expected_selected_sum,
                budget: s,
            });
        }
        if self.solution.trivial {
            return Ok(self.bound);
        }
        if self.solution.t <= 0.0 {
            return Err(BrsError::DivisionByZeroThreshold);
        }
        Ok(self.bound - (s - expected_selected_sum) / self.solution.t)
    }

    /// `p_n·refined + n·(1 - p_n)` where `p_n = P(N < n)`.
    pub fn corollary(&self, s: f64, p_n: f64, expected_selected_sum: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p_n) {
            return Err(BrsError::InvalidProbability(p_n));
        }
        let n = self.n as f64;
        let refined = self.refined(s, expected_selected_sum)?;
        Ok(p_n * refined + n * (1.0 - p_n))
    }
}

/// Residual refinement: `brs_bound - (s - E S_A)/t`.
pub fn refined_bound(model: &MixtureModel, s: f64, expected_selected_sum: f64) -> Result<f64> {
    brs_bound(model, s)?.refined(s, expected_selected_sum)
}

/// Refinement conditioned on `N < n`, with `p_n = P(N(n,s) < n)`.
pub fn corollary_bound(
    model: &MixtureModel,
    s: f64,
    p_n: f64,
    expected_selected_sum: f64,
) -> Result<f64> {
    brs_bound(model, s)?.corollary(s, p_n, expected_selected_sum)
}

/// Harmonic number `H_n`.
pub fn harmonic(n: u64) -> f64 {
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}
