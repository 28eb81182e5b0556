//! Ground truth for `N(n,s)`: the greedy count on a realized sample, an
//! exhaustive subset oracle, Monte Carlo estimates under several dependence
//! structures, and a per-sample check of the key inequality
//! `t(|A| - |B|) ≤ S_A - S_B`.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::bound::{brs_bound, solve_brs_equation, MixtureModel};
use crate::distributions::DistributionSpec;
use crate::error::{BrsError, Result};
use crate::rng::{replicate_rng, run_replicates, Moments};

/// Largest sample accepted by [`brute_force_max_count`].
pub const MAX_ENUMERATION_LEN: usize = 20;

/// How the `n` variables of one realization are generated.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// `n` independent draws from `dist`.
    Iid { dist: DistributionSpec, n: usize },
    /// One draw repeated `n` times.
    FullyDependent { dist: DistributionSpec, n: usize },
    /// Blocks of geometric(p) length on `{1, 2, ...}`; each block opens with a
    /// fresh `U[0,1]` value `X` and continues `1-X, X, 1-X, ...`.
    AlternatingBlocks { p: f64, n: usize },
    /// Independent draws, `n_k` of them from law `k`, in component order.
    Mixture(MixtureModel),
}

impl Scenario {
    pub fn n(&self) -> usize {
        match self {
            Self::Iid { n, .. }
            | Self::FullyDependent { n, .. }
            | Self::AlternatingBlocks { n, .. } => *n,
            Self::Mixture(m) => m.total_count() as usize,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Iid { .. } => "iid",
            Self::FullyDependent { .. } => "fully_dependent",
            Self::AlternatingBlocks { .. } => "alternating_blocks",
            Self::Mixture(_) => "mixture",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Iid { dist, n } | Self::FullyDependent { dist, n } => {
                if *n == 0 {
                    return Err(BrsError::InvalidParameter(
                        "scenario n must be positive".into(),
                    ));
                }
                dist.validate()
            }
            Self::AlternatingBlocks { p, n } => {
                if *n == 0 {
                    return Err(BrsError::InvalidParameter(
                        "scenario n must be positive".into(),
                    ));
                }
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(BrsError::InvalidProbability(*p));
                }
                Ok(())
            }
            Self::Mixture(m) => m.validate(),
        }
    }

    /// Per-coordinate marginals, as a mixture model for the bound.
    pub fn marginal_model(&self) -> Result<MixtureModel> {
        match self {
            Self::Iid { dist, n } | Self::FullyDependent { dist, n } => {
                MixtureModel::iid(*n as u64, dist.clone())
            }
            Self::AlternatingBlocks { n, .. } => {
                MixtureModel::iid(*n as u64, DistributionSpec::standard_uniform())
            }
            Self::Mixture(m) => Ok(m.clone()),
        }
    }

    /// Fills `out` with one realization.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        match self {
            Self::Iid { dist, n } => out.extend((0..*n).map(|_| dist.sample(rng))),
            Self::FullyDependent { dist, n } => {
                let x = dist.sample(rng);
                out.resize(*n, x);
            }
            Self::AlternatingBlocks { p, n } => {
                let blocks = Geometric::new(*p).expect("validated block probability");
                while out.len() < *n {
                    let len = 1 + blocks.sample(rng) as usize;
                    let x: f64 = rng.random();
                    for j in 0..len.min(*n - out.len()) {
                        out.push(if j % 2 == 0 { x } else { 1.0 - x });
                    }
                }
            }
            Self::Mixture(m) => {
                for c in &m.components {
                    out.extend((0..c.count).map(|_| c.dist.sample(rng)));
                }
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n());
        self.draw_into(rng, &mut out);
        out
    }
}

/// Outcome of the greedy selection on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// `N(n,s)`.
    pub count: usize,
    /// `S_A`.
    pub selected_sum: f64,
    /// `A(n,s)`, in selection order.
    pub selected_indices: Vec<usize>,
    /// The smallest unselected value, when one exists.
    pub overshoot_value: Option<f64>,
}

/// Indices sorted by `(value, index)`.
fn total_order(sample: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&i, &j| sample[i].total_cmp(&sample[j]).then(i.cmp(&j)));
    order
}

/// Length of the longest prefix of `sorted` whose sum stays within `s`, and
/// that sum.
fn feasible_prefix(sorted: impl Iterator<Item = f64>, s: f64) -> (usize, f64) {
    let mut sum = 0.0;
    let mut count = 0;
    for x in sorted {
        let next = sum + x;
        if next > s {
            break;
        }
        sum = next;
        count += 1;
    }
    (count, sum)
}

/// `N(n,s)`: take the smallest values first (ties by index) while the running
/// sum stays within `s`.
pub fn max_feasible_count(sample: &[f64], s: f64) -> SelectionResult {
    let order = total_order(sample);
    let (count, selected_sum) = feasible_prefix(order.iter().map(|&i| sample[i]), s);
    SelectionResult {
        count,
        selected_sum,
        selected_indices: order[..count].to_vec(),
        overshoot_value: order.get(count).map(|&i| sample[i]),
    }
}

/// Count and selected sum only; sorts `values` in place.
pub fn greedy_count_in_place(values: &mut [f64], s: f64) -> (usize, f64) {
    values.sort_unstable_by(f64::total_cmp);
    feasible_prefix(values.iter().copied(), s)
}

/// Maximum cardinality over all subsets with sum at most `s`.
pub fn brute_force_max_count(sample: &[f64], s: f64) -> Result<usize> {
    let len = sample.len();
    if len > MAX_ENUMERATION_LEN {
        return Err(BrsError::TooLarge {
            len,
            max: MAX_ENUMERATION_LEN,
        });
    }
    let mut best = 0;
    for mask in 0u32..(1u32 << len) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let sum: f64 = (0..len)
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| sample[i])
            .sum();
        if sum <= s {
            best = size;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: String,
    pub n: usize,
    pub s: f64,
    pub reps: u64,
    pub seed: u64,
    pub mean_count: f64,
    pub count_stderr: f64,
    pub mean_selected_sum: f64,
    pub selected_sum_stderr: f64,
    /// Fraction of replicates with `N < n`.
    pub p_below_n: f64,
    /// The bound for the scenario's marginals, for comparison.
    pub bound_used: f64,
}

/// Monte Carlo estimate of `E N(n,s)`, `E S_A` and `P(N < n)`.
pub fn mc_estimate(scenario: &Scenario, s: f64, reps: u64, seed: u64) -> Result<McReport> {
    mc_estimate_with_workers(scenario, s, reps, seed, None)
}

/// As [`mc_estimate`], on at most `workers` threads. The report does not
/// depend on `workers`.
pub fn mc_estimate_with_workers(
    scenario: &Scenario,
    s: f64,
    reps: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<McReport> {
    scenario.validate()?;
    if !(s.is_finite() && s > 0.0) {
        return Err(BrsError::InvalidBudget(s));
    }
    if reps == 0 {
        return Err(BrsError::InvalidParameter("reps must be at least 1".into()));
    }
    let n = scenario.n();
    let outcomes = run_replicates(reps, seed, workers, |_, rng| {
        let mut values = scenario.draw(rng);
        greedy_count_in_place(&mut values, s)
    });
    let counts: Vec<f64> = outcomes.iter().map(|&(c, _)| c as f64).collect();
    let sums: Vec<f64> = outcomes.iter().map(|&(_, v)| v).collect();
    let below = outcomes.iter().filter(|&&(c, _)| c < n).count();
    let count_moments = Moments::of(&counts);
    let sum_moments = Moments::of(&sums);
    let bound_used = brs_bound(&scenario.marginal_model()?, s)?.bound;
    Ok(McReport {
        scenario: scenario.kind().to_string(),
        n,
        s,
        reps,
        seed,
        mean_count: count_moments.mean,
        count_stderr: if reps > 1 {
            count_moments.stderr()
        } else {
            0.0
        },
        mean_selected_sum: sum_moments.mean,
        selected_sum_stderr: if reps > 1 { sum_moments.stderr() } else { 0.0 },
        p_below_n: below as f64 / reps as f64,
        bound_used,
    })
}

/// `E N(n,s)` for `n` copies of one `U[0,1]` value: `Σ_k min(1, s/k)`.
pub fn fully_dependent_uniform_mean(n: usize, s: f64) -> f64 {
    (1..=n).map(|k| (s / k as f64).min(1.0)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyInequalityReport {
    /// `|A|`.
    pub a_count: usize,
    /// `|B|` with `B = {i : X_i ≤ t}`.
    pub b_count: usize,
    pub s_a: f64,
    pub s_b: f64,
    /// `t (|A| - |B|)`.
    pub lhs: f64,
    /// `S_A - S_B`, summed over the symmetric difference.
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates both sides of `t(|A| - |B|) ≤ S_A - S_B` on one sample.
///
/// `A` and `B` are both prefixes of the `(value, index)` order, so the right
/// side is the signed sum over the values between the two prefix ends. The
/// comparison allows only the rounding of that sum.
pub fn key_inequality_check(sample: &[f64], s: f64, t: f64) -> Result<KeyInequalityReport> {
    if !(t > 0.0) {
        return Err(BrsError::OutOfRange {
            what: "t",
            value: t,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let order = total_order(sample);
    let sorted: Vec<f64> = order.iter().map(|&i| sample[i]).collect();
    let (a, s_a) = feasible_prefix(sorted.iter().copied(), s);
    let b = sorted.partition_point(|&x| x <= t);
    let s_b: f64 = sorted[..b].iter().sum();
    let (rhs, k) = if a >= b {
        (sorted[b..a].iter().sum::<f64>(), a - b)
    } else {
        (-sorted[a..b].iter().sum::<f64>(), b - a)
    };
    let lhs = t * (a as f64 - b as f64);
    let k = k as f64;
    let slack = (k + 2.0) * k * f64::EPSILON * t;
    Ok(KeyInequalityReport {
        a_count: a,
        b_count: b,
        s_a,
        s_b,
        lhs,
        rhs,
        holds: lhs <= rhs + slack,
    })
}

/// One realization of `N(n, s_n) / (n F(t(n, s_n)))` per `n` in `n_grid`,
/// with `s_n = budget_fraction · n` and independent draws from `dist`.
pub fn asymptotic_ratio(
    dist: &DistributionSpec,
    budget_fraction: f64,
    n_grid: &[usize],
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    dist.validate()?;
    let mean = dist.total_mean()?;
    if !(budget_fraction > 0.0) {
        return Err(BrsError::InvalidBudget(budget_fraction));
    }
    if budget_fraction >= mean {
        return Err(BrsError::TrivialRegime {
            budget: budget_fraction,
            total_mean: mean,
        });
    }
    n_grid
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            if n == 0 {
                return Err(BrsError::InvalidParameter("n must be positive".into()));
            }
            let s = budget_fraction * n as f64;
            let model = MixtureModel::iid(n as u64, dist.clone())?;
            let t = solve_brs_equation(&model, s)?.t;
            let mut rng = replicate_rng(seed, j as u64);
            let mut values: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            let (count, _) = greedy_count_in_place(&mut values, s);
            Ok((n, count as f64 / (n as f64 * dist.cdf(t))))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_examples() {
        let r = max_feasible_count(&[0.5, 0.2, 0.9], 0.8);
        assert_eq!(r.count, 2);
        assert!((r.selected_sum - 0.7).abs() < 1e-15);
        assert_eq!(r.selected_indices, vec![1, 0]);
        assert_eq!(r.overshoot_value, Some(0.9));

        let r = max_feasible_count(&[0.3], 0.2);
        assert_eq!(r.count, 0);
        assert_eq!(r.overshoot_value, Some(0.3));

        let r = max_feasible_count(&[0.4, 0.4, 0.4], 0.8);
        assert_eq!(r.count, 2);
        assert_eq!(r.selected_indices, vec![0, 1]);

        let r = max_feasible_count(&[0.1, 0.2], 1.0);
        assert_eq!(r.count, 2);
        assert_eq!(r.overshoot_value, None);
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_max_count(&[0.5, 0.2, 0.9], 0.8).unwrap(), 2);
        assert_eq!(brute_force_max_count(&[0.6, 0.6], 0.5).unwrap(), 0);
        assert!(matches!(
            brute_force_max_count(&[0.1; 21], 1.0),
            Err(BrsError::TooLarge { len: 21, max: 20 })
        ));
    }

    #[test]
    fn greedy_matches_enumeration_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let sample: Vec<f64> = (0..10).map(|_| rng.random()).collect();
            let s = 5.0 * rng.random::<f64>();
            assert_eq!(
                max_feasible_count(&sample, s).count,
                brute_force_max_count(&sample, s).unwrap()
            );
        }
    }

    #[test]
    fn key_inequality_examples() {
        let r = key_inequality_check(&[0.5, 0.2, 0.9], 0.8, 0.25).unwrap();
        assert_eq!((r.a_count, r.b_count), (2, 1));
        assert!((r.lhs - 0.25).abs() < 1e-15);
        assert!((r.rhs - 0.5).abs() < 1e-15);
        assert!((r.s_a - r.s_b - 0.5).abs() < 1e-15);
        assert!(r.holds);

        // t picks exactly the greedy set
        let r = key_inequality_check(&[0.5, 0.2, 0.9], 0.8, 0.6).unwrap();
        assert_eq!(r.a_count, r.b_count);
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn fully_dependent_closed_form() {
        assert!((fully_dependent_uniform_mean(3, 1.0) - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn alternating_blocks_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // p = 1 gives blocks of length one, so all values are fresh
        let x = Scenario::AlternatingBlocks { p: 1.0, n: 50 }.draw(&mut rng);
        assert_eq!(x.len(), 50);
        // tiny p makes one long alternating block
        let y = Scenario::AlternatingBlocks { p: 1e-12, n: 7 }.draw(&mut rng);
        for j in 0..7 {
            let expect = if j % 2 == 0 { y[0] } else { 1.0 - y[0] };
            assert_eq!(y[j], expect);
        }
        assert!(Scenario::AlternatingBlocks { p: 0.0, n: 3 }
            .validate()
            .is_err());
    }

    #[test]
    fn alternating_block_marginals_are_uniform() {
        let scenario = Scenario::AlternatingBlocks { p: 0.3, n: 12 };
        let reps = 10_000;
        let draws: Vec<Vec<f64>> = run_replicates(reps, 77, None, |_, rng| scenario.draw(rng));
        for coord in 0..12 {
            let mut xs: Vec<f64> = draws.iter().map(|d| d[coord]).collect();
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let ks = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| (x - i as f64 / n).abs().max((x - (i + 1) as f64 / n).abs()))
                .fold(0.0, f64::max);
            assert!(ks < 0.02, "coordinate {coord}: KS {ks}");
        }
    }

    #[test]
    fn mc_tiny_budget_selects_nothing() {
        let sc = Scenario::Iid {
            dist: DistributionSpec::exponential(1.0),
            n: 5,
        };
        let r = mc_estimate(&sc, 1e-6, 2000, 1).unwrap();
        assert!(r.mean_count < 0.01);
        assert!(matches!(
            mc_estimate(&sc, 0.0, 10, 1),
            Err(BrsError::InvalidBudget(_))
        ));
    }

    #[test]
    fn mc_uniform_iid_below_bound() {
        let sc = Scenario::Iid {
            dist: DistributionSpec::standard_uniform(),
            n: 100,
        };
        let r = mc_estimate(&sc, 2.0, 10_000, 3).unwrap();
        assert!((r.bound_used - 20.0).abs() < 1e-9);
        assert!(
            r.mean_count <= 20.0 && r.mean_count >= 17.0,
            "{}",
            r.mean_count
        );
        assert!(r.mean_selected_sum <= 2.0);
        assert_eq!(r.p_below_n, 1.0);
    }

    #[test]
    fn mc_fully_dependent_calibration() {
        let sc = Scenario::FullyDependent {
            dist: DistributionSpec::standard_uniform(),
            n: 3,
        };
        let r = mc_estimate(&sc, 1.0, 100_000, 8).unwrap();
        let exact = fully_dependent_uniform_mean(3, 1.0);
        assert!((r.mean_count - exact).abs() <= 3.0 * r.count_stderr);
    }

    #[test]
    fn mc_is_deterministic_across_workers() {
        let sc = Scenario::AlternatingBlocks { p: 0.2, n: 40 };
        let a = mc_estimate_with_workers(&sc, 3.0, 3000, 99, Some(1)).unwrap();
        let b = mc_estimate_with_workers(&sc, 3.0, 3000, 99, Some(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean_count.to_bits(), b.mean_count.to_bits());
    }

    #[test]
    fn asymptotic_ratio_cases() {
        let u = DistributionSpec::standard_uniform();
        let r = asymptotic_ratio(&u, 0.125, &[1_000, 10_000, 100_000], 12).unwrap();
        let last = r.last().unwrap().1;
        assert!((0.97..=1.03).contains(&last), "{last}");
        let r = asymptotic_ratio(&u, 0.125, &[1], 5).unwrap();
        // t = 0.5 for n = 1, so the ratio is 0 or 2
        assert!(r[0].1 == 0.0 || r[0].1 == 2.0);
        assert!(matches!(
            asymptotic_ratio(&u, 0.5, &[10], 1),
            Err(BrsError::TrivialRegime { .. })
        ));
    }

    fn sample_and_budget(max_len: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
        (prop::collection::vec(0.0..1.0f64, 1..=max_len), 0.0..4.0f64)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn greedy_is_optimal((sample, s) in sample_and_budget(12)) {
            prop_assert_eq!(
                max_feasible_count(&sample, s).count,
                brute_force_max_count(&sample, s).unwrap()
            );
        }

        #[test]
        fn more_budget_never_hurts((sample, s) in sample_and_budget(30), extra in 0.0..2.0f64) {
            prop_assert!(max_feasible_count(&sample, s + extra).count >= max_feasible_count(&sample, s).count);
        }

        #[test]
        fn selection_invariants((sample, s) in sample_and_budget(30)) {
            let r = max_feasible_count(&sample, s);
            prop_assert!(r.selected_sum <= s);
            prop_assert_eq!(r.count, r.selected_indices.len());
            if let Some(x) = r.overshoot_value {
                prop_assert!(r.selected_sum + x > s);
            }
        }

        #[test]
        fn key_inequality_holds((sample, s) in sample_and_budget(40), t in 1e-6..1.5f64) {
            prop_assert!(key_inequality_check(&sample, s, t).unwrap().holds);
        }
    }
}
