//! Seeded replicate streams and order-stable reductions.
//!
//! Replicate `i` of a run with seed `s` always draws from ChaCha8 stream `i`
//! keyed by `s`, and per-replicate results are reduced in index order, so
//! output bits do not depend on how many workers ran the replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Seed used when the caller does not choose one.
pub const DEFAULT_SEED: u64 = 0x5EED_B125_2024_0001;

pub type ReplicateRng = ChaCha8Rng;

pub fn replicate_rng(seed: u64, index: u64) -> ReplicateRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f(i, rng_i)` for `i in 0..reps` and returns results in index order.
///
/// `workers = None` uses the global rayon pool; `Some(k)` caps the run at `k`
/// threads. Results are identical either way.
pub fn run_replicates<T, F>(reps: u64, seed: u64, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ReplicateRng) -> T + Sync + Send,
{
    let job = || {
        (0..reps)
            .into_par_iter()
            .map(|i| f(i, &mut replicate_rng(seed, i)))
            .collect::<Vec<T>>()
    };
    match workers {
        Some(1) => (0..reps)
            .map(|i| f(i, &mut replicate_rng(seed, i)))
            .collect(),
        Some(k) => match rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
        {
            Ok(pool) => pool.install(job),
            Err(_) => (0..reps)
                .map(|i| f(i, &mut replicate_rng(seed, i)))
                .collect(),
        },
        None => job(),
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Mean and unbiased variance of a sequence, reduced in order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Self {
                count,
                mean: f64::NAN,
                variance: f64::NAN,
            };
        }
        let mean = xs.iter().copied().collect::<CompensatedSum>().value() / count as f64;
        let variance = if count > 1 {
            xs.iter()
                .map(|x| (x - mean) * (x - mean))
                .collect::<CompensatedSum>()
                .value()
                / (count - 1) as f64
        } else {
            0.0
        };
        Self {
            count,
            mean,
            variance,
        }
    }

    pub fn stderr(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}
