//! Area-threshold selection of random rectangles and ellipses in a region of
//! area `s`. Only areas are modelled; geometric placement is not.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bound::{brs_bound, solve_brs_equation, MixtureModel, ThresholdSolution};
use crate::distributions::DistributionSpec;
use crate::error::{BrsError, Result};
use crate::oracle::greedy_count_in_place;
use crate::rng::{replicate_rng, run_replicates};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TilingModel {
    pub n_rect: u64,
    pub n_ellipse: u64,
    /// Area of the region to fill.
    pub target_area: f64,
}

impl TilingModel {
    pub fn new(n_rect: u64, n_ellipse: u64, target_area: f64) -> Result<Self> {
        let m = Self {
            n_rect,
            n_ellipse,
            target_area,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rect + self.n_ellipse == 0 {
            return Err(BrsError::InvalidParameter(
                "tiling model has no shapes".into(),
            ));
        }
        if !(self.target_area.is_finite() && self.target_area > 0.0) {
            return Err(BrsError::InvalidBudget(self.target_area));
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.n_rect + self.n_ellipse
    }

    /// Rectangle and ellipse area laws, skipping empty types.
    pub fn mixture(&self) -> Result<MixtureModel> {
        self.mixture_from(
            DistributionSpec::rectangle_area(),
            DistributionSpec::ellipse_area(),
        )
    }

    /// Same mixture with both laws given only by their densities, so every
    /// moment goes through adaptive quadrature.
    pub fn numeric_mixture(&self) -> Result<MixtureModel> {
        let rect = DistributionSpec::rectangle_area();
        let ell = DistributionSpec::ellipse_area();
        let (rs, es) = (rect.support_sup(), ell.support_sup());
        self.mixture_from(
            DistributionSpec::numeric(move |u| rect.density(u), rs),
            DistributionSpec::numeric(move |u| ell.density(u), es),
        )
    }

    fn mixture_from(&self, rect: DistributionSpec, ell: DistributionSpec) -> Result<MixtureModel> {
        self.validate()?;
        let mut comps = Vec::with_capacity(2);
        if self.n_rect > 0 {
            comps.push((self.n_rect, rect));
        }
        if self.n_ellipse > 0 {
            comps.push((self.n_ellipse, ell));
        }
        MixtureModel::new(comps)
    }
}

/// Area threshold `t` solving `n₁ M_rect(t) + n₂ M_ellipse(t) = s`.
pub fn tiling_threshold(model: &TilingModel) -> Result<ThresholdSolution> {
    solve_brs_equation(&model.mixture()?, model.target_area)
}

/// `n₁ F_rect(t) + n₂ F_ellipse(t)`.
pub fn tiling_bound(model: &TilingModel) -> Result<f64> {
    Ok(brs_bound(&model.mixture()?, model.target_area)?.bound)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSelection {
    /// `N(n, s)` on the drawn areas.
    pub greedy_count: usize,
    pub greedy_area: f64,
    /// Shapes with area at most `t`, regardless of whether they fit together.
    pub threshold_count: usize,
    pub threshold_area: f64,
}

/// Draws `n₁ + n₂` shapes, each a rectangle with probability `n₁/n`, and
/// compares the exact greedy count with the threshold rule at `t`.
pub fn simulate_shape_selection(model: &TilingModel, seed: u64) -> Result<ShapeSelection> {
    let t = threshold_or_sup(model)?;
    let mut rng = replicate_rng(seed, 0);
    Ok(select_once(model, t, &mut rng))
}

/// `reps` independent replications, one stream each.
pub fn simulate_shape_selections(
    model: &TilingModel,
    reps: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<ShapeSelection>> {
    let t = threshold_or_sup(model)?;
    Ok(run_replicates(reps, seed, workers, |_, rng| {
        select_once(model, t, rng)
    }))
}

fn threshold_or_sup(model: &TilingModel) -> Result<f64> {
    Ok(tiling_threshold(model)?.t)
}

fn select_once<R: Rng + ?Sized>(model: &TilingModel, t: f64, rng: &mut R) -> ShapeSelection {
    let rect = DistributionSpec::rectangle_area();
    let ell = DistributionSpec::ellipse_area();
    let p_rect = model.n_rect as f64 / model.total() as f64;
    let mut areas: Vec<f64> = (0..model.total())
        .map(|_| {
            if rng.random::<f64>() < p_rect {
                rect.sample(rng)
            } else {
                ell.sample(rng)
            }
        })
        .collect();
    let (threshold_count, threshold_area) = areas
        .iter()
        .filter(|&&a| a <= t)
        .fold((0, 0.0), |(c, s), &a| (c + 1, s + a));
    let (greedy_count, greedy_area) = greedy_count_in_place(&mut areas, model.target_area);
    ShapeSelection {
        greedy_count,
        greedy_area,
        threshold_count,
        threshold_area,
    }
}
