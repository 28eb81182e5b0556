//! Every published number the library can recompute, with its tolerance.

use brs::bound::{brs_bound, harmonic, MixtureModel};
use brs::dp::{self, DpConfig};
use brs::oracle::{self, Scenario};
use brs::point_process::{max_density_bound, poisson_threshold, simulate_condensed_density};
use brs::rng::{run_replicates, Moments};
use brs::tiling::{simulate_shape_selections, tiling_bound, tiling_threshold, TilingModel};
use brs::{DistributionSpec, Result};
use rand::Rng;
use serde::Serialize;

use crate::output::fmt_num;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    Abs {
        tol: f64,
    },
    Rel {
        tol: f64,
    },
    /// `computed ≤ published + slack`.
    AtMost {
        slack: f64,
    },
    Within {
        lo: f64,
        hi: f64,
    },
}

impl Check {
    fn passes(self, published: f64, computed: f64) -> bool {
        match self {
            Self::Abs { tol } => (computed - published).abs() <= tol,
            Self::Rel { tol } => (computed - published).abs() <= tol * published.abs(),
            Self::AtMost { slack } => computed <= published + slack,
            Self::Within { lo, hi } => (lo..=hi).contains(&computed),
        }
    }

    pub fn describe(self) -> String {
        match self {
            Self::Abs { tol } => format!("abs {}", fmt_num(tol)),
            Self::Rel { tol } => format!("rel {}", fmt_num(tol)),
            Self::AtMost { slack } => format!("at most +{}", fmt_num(slack)),
            Self::Within { lo, hi } => format!("in [{}, {}]", fmt_num(lo), fmt_num(hi)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Target {
    pub label: String,
    pub published: f64,
    pub computed: f64,
    pub check: Check,
    pub pass: bool,
}

impl Target {
    fn new(label: &str, published: f64, computed: f64, check: Check) -> Self {
        Self {
            label: label.to_string(),
            published,
            computed,
            check,
            pass: check.passes(published, computed),
        }
    }
}

/// Recomputes the full table. Monte Carlo entries use streams derived from
/// `seed`; the result does not depend on `workers`.
pub fn reproduce(seed: u64, workers: Option<usize>) -> Result<Vec<Target>> {
    let uniform = DistributionSpec::standard_uniform();
    let mut out = Vec::new();
    let abs = |tol| Check::Abs { tol };

    out.push(Target::new(
        "uniform F(0.3)",
        0.3,
        uniform.cdf(0.3),
        abs(1e-12),
    ));
    out.push(Target::new(
        "rectangle area F(0.5)",
        0.84657,
        DistributionSpec::rectangle_area().cdf(0.5),
        abs(5e-6),
    ));
    out.push(Target::new(
        "uniform M(0.2)",
        0.02,
        uniform.truncated_mean(0.2)?,
        abs(1e-12),
    ));
    out.push(Target::new(
        "exponential M(1) = 1 - 2/e",
        1.0 - 2.0 / std::f64::consts::E,
        DistributionSpec::exponential(1.0).truncated_mean(1.0)?,
        abs(1e-9),
    ));
    out.push(Target::new(
        "uniform mean",
        0.5,
        uniform.total_mean()?,
        abs(1e-12),
    ));

    let u100 = MixtureModel::iid(100, uniform.clone())?;
    let r = brs_bound(&u100, 2.0)?;
    out.push(Target::new(
        "uniform n=100 s=2 threshold",
        0.2,
        r.solution.t,
        abs(1e-9),
    ));
    out.push(Target::new(
        "uniform n=100 s=2 bound",
        20.0,
        r.bound,
        abs(1e-8),
    ));

    let harmonic10 = MixtureModel::new(
        (1..=10)
            .map(|k| (1, DistributionSpec::uniform(f64::from(k))))
            .collect(),
    )?;
    let r = brs_bound(&harmonic10, 1.0)?;
    out.push(Target::new(
        "harmonic n=10 threshold sqrt(2/H_10)",
        (2.0f64 / 2.92897).sqrt(),
        r.solution.t,
        abs(5e-6),
    ));
    out.push(Target::new(
        "harmonic n=10 bound sqrt(2 H_10)",
        2.42032,
        r.bound,
        abs(5e-6),
    ));
    out.push(Target::new(
        "harmonic H_10",
        2.92897,
        harmonic(10),
        abs(5e-6),
    ));

    let u10 = MixtureModel::iid(10, uniform.clone())?;
    out.push(Target::new(
        "uniform n=10 s=5 trivial bound",
        10.0,
        brs_bound(&u10, 5.0)?.bound,
        abs(0.0),
    ));
    out.push(Target::new(
        "greedy count of [0.3] with s=0.2",
        0.0,
        oracle::max_feasible_count(&[0.3], 0.2).count as f64,
        abs(0.0),
    ));

    let fd = Scenario::FullyDependent {
        dist: uniform.clone(),
        n: 3,
    };
    let mc = oracle::mc_estimate_with_workers(&fd, 1.0, 100_000, seed, workers)?;
    out.push(Target::new(
        "fully dependent n=3 s=1 mean count (3 stderr)",
        11.0 / 6.0,
        mc.mean_count,
        abs(3.0 * mc.count_stderr),
    ));

    let knap = dp::knapsack_value(&uniform, DpConfig::new(50, 1024))?;
    let subs = dp::subsequence_value(&uniform, DpConfig::new(200, 1024))?;
    out.push(Target::new(
        "knapsack v_50(1) at most sqrt(100)",
        10.0,
        knap.final_value(),
        Check::AtMost { slack: 0.0 },
    ));
    let gap = (1..=50)
        .map(|n| (knap.value(n, 1.0).unwrap() - subs.value(n, 1.0).unwrap()).abs())
        .fold(0.0, f64::max);
    out.push(Target::new(
        "max |v_n(1) - subsequence v_n(1)|, n<=50",
        0.0,
        gap,
        abs(1e-2),
    ));
    let excess = (1..=200)
        .map(|n| subs.value(n, 1.0).unwrap() - (2.0 * n as f64).sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(Target::new(
        "max subsequence v_n(1) - sqrt(2n), n<=200",
        0.0,
        excess,
        Check::AtMost { slack: 0.0 },
    ));

    let big = dp::subsequence_value(&uniform, DpConfig::new(5000, 4096))?;
    let sim = dp::simulate_policy_with_workers(&big, 5000, 2000, seed.wrapping_add(1), workers)?;
    out.push(Target::new(
        "subsequence Var(V_5000) / (sqrt(2n)/3)",
        1.0,
        sim.variance / ((2.0f64 * 5000.0).sqrt() / 3.0),
        Check::Within { lo: 0.7, hi: 1.3 },
    ));
    drop(big);

    let lis: Vec<f64> = run_replicates(200, seed.wrapping_add(2), workers, |_, rng| {
        let sample: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        dp::clairvoyant_lis(&sample) as f64
    });
    out.push(Target::new(
        "mean LIS n=1e4 vs 2 sqrt(n) - 1.77108 n^(1/6)",
        dp::lis_mean_asymptotic(10_000),
        Moments::of(&lis).mean,
        Check::Rel { tol: 0.03 },
    ));

    let exp1 = DistributionSpec::exponential(1.0);
    let poisson = MixtureModel::iid(1000, exp1.clone())?;
    out.push(Target::new(
        "poisson threshold s/n=0.5",
        1.67835,
        poisson_threshold(0.5)?,
        abs(5e-4),
    ));
    let half = max_density_bound(&poisson, 500.0)?;
    out.push(Target::new(
        "poisson density bound s/n=0.5",
        1.62664,
        half.d_max_bound,
        abs(5e-4),
    ));
    let twentieth = max_density_bound(&poisson, 50.0)?;
    out.push(Target::new(
        "poisson inflation s/n=0.05",
        6.0,
        twentieth.inflation_factor,
        Check::Within { lo: 5.8, hi: 6.1 },
    ));
    out.push(Target::new(
        "condensed density n=1e5 s/n=0.5",
        1.62664,
        simulate_condensed_density(&exp1, 100_000, 0.5, seed.wrapping_add(3))?,
        Check::Rel { tol: 0.02 },
    ));

    let tiling = TilingModel::new(300, 150, 1.0)?;
    out.push(Target::new(
        "tiling threshold",
        0.0326,
        tiling_threshold(&tiling)?.t,
        abs(5e-4),
    ));
    out.push(Target::new(
        "tiling bound",
        69.325,
        tiling_bound(&tiling)?,
        abs(5e-2),
    ));
    let runs = simulate_shape_selections(&tiling, 1000, seed.wrapping_add(4), workers)?;
    let counts: Vec<f64> = runs.iter().map(|r| r.greedy_count as f64).collect();
    let m = Moments::of(&counts);
    out.push(Target::new(
        "tiling mean greedy count at most bound (3 stderr)",
        69.325,
        m.mean,
        Check::AtMost {
            slack: 3.0 * m.stderr(),
        },
    ));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks() {
        assert!(Check::Abs { tol: 0.1 }.passes(1.0, 1.05));
        assert!(!Check::Rel { tol: 0.01 }.passes(100.0, 102.0));
        assert!(Check::AtMost { slack: 0.0 }.passes(10.0, 9.9));
        assert!(!Check::Within { lo: 5.8, hi: 6.1 }.passes(6.0, 6.2));
    }
}
