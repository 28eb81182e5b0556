//! Marginal laws of the nonnegative variables being summed.
//!
//! Every family exposes its CDF `F`, the truncated first moment
//! `M(t) = ∫_0^t x dF(x)`, the total mean `M(∞)`, the supremum of its support
//! and a sampler. The named families have closed forms; [`NumericDensity`]
//! falls back to adaptive quadrature of a user-supplied density.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BrsError, Result};
use crate::quadrature::{integrate_from_origin, integrate_with, QuadConfig};
use crate::root::brent;

/// Area scale of the ellipse family: `π·A·B` with `A, B ~ U[0, 1/2]` equals
/// `(π/4)·W` with `W` a product of two standard uniforms.
const ELLIPSE_SCALE: f64 = PI / 4.0;

/// One marginal distribution `F_k`.
///
/// Serialized as `{"family": "...", "params": {...}}`. The numeric family
/// carries a function handle and is not serializable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// Uniform on `[0, b]`.
    #[serde(rename = "uniform")]
    UniformOn {
        b: f64,
    },
    /// Uniform on `[0, 1/k]`.
    ScaledUniformTop {
        k: u32,
    },
    Exponential {
        rate: f64,
    },
    /// Area `X·Y` of a rectangle with independent `U[0,1]` sides.
    RectangleArea {},
    /// Area `π·A·B` of an ellipse with independent `U[0,1/2]` semi-axes.
    EllipseArea {},
    #[serde(skip)]
    NumericDensity(NumericDensity),
}

impl DistributionSpec {
    pub fn uniform(b: f64) -> Self {
        Self::UniformOn { b }
    }

    pub fn standard_uniform() -> Self {
        Self::UniformOn { b: 1.0 }
    }

    pub fn scaled_uniform_top(k: u32) -> Self {
        Self::ScaledUniformTop { k }
    }

    pub fn exponential(rate: f64) -> Self {
        Self::Exponential { rate }
    }

    pub fn rectangle_area() -> Self {
        Self::RectangleArea {}
    }

    pub fn ellipse_area() -> Self {
        Self::EllipseArea {}
    }

    pub fn numeric<F>(density: F, support_sup: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::NumericDensity(NumericDensity::new(density, support_sup))
    }

    /// Short family name, as used in the JSON schema.
    pub fn family(&self) -> &'static str {
        match self {
            Self::UniformOn { .. } => "uniform",
            Self::ScaledUniformTop { .. } => "scaled_uniform_top",
            Self::Exponential { .. } => "exponential",
            Self::RectangleArea {} => "rectangle_area",
            Self::EllipseArea {} => "ellipse_area",
            Self::NumericDensity(_) => "numeric_density",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(BrsError::InvalidParameter(format!(
                "{} parameter {what} = {v} must be finite and positive",
                self.family()
            )))
        };
        match *self {
            Self::UniformOn { b } if !(b.is_finite() && b > 0.0) => bad("b", b),
            Self::ScaledUniformTop { k: 0 } => bad("k", 0.0),
            Self::Exponential { rate } if !(rate.is_finite() && rate > 0.0) => bad("rate", rate),
            Self::NumericDensity(ref d) if !(d.support_sup > 0.0) => {
                bad("support_sup", d.support_sup)
            }
            _ => Ok(()),
        }
    }

    /// Supremum of the support; `f64::INFINITY` for unbounded laws.
    pub fn support_sup(&self) -> f64 {
        match *self {
            Self::UniformOn { b } => b,
            Self::ScaledUniformTop { k } => 1.0 / f64::from(k),
            Self::Exponential { .. } => f64::INFINITY,
            Self::RectangleArea {} => 1.0,
            Self::EllipseArea {} => ELLIPSE_SCALE,
            Self::NumericDensity(ref d) => d.support_sup,
        }
    }

    /// Density, where it exists. Infinite at the origin for the area laws.
    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 || x > self.support_sup() {
            return 0.0;
        }
        match *self {
            Self::UniformOn { b } => 1.0 / b,
            Self::ScaledUniformTop { k } => f64::from(k),
            Self::Exponential { rate } => rate * (-rate * x).exp(),
            Self::RectangleArea {} => -x.ln(),
            Self::EllipseArea {} => -(x / ELLIPSE_SCALE).ln() / ELLIPSE_SCALE,
            Self::NumericDensity(ref d) => (d.density)(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.support_sup() {
            return 1.0;
        }
        match *self {
            Self::UniformOn { b } => x / b,
            Self::ScaledUniformTop { k } => x * f64::from(k),
            Self::Exponential { rate } => -(-rate * x).exp_m1(),
            Self::RectangleArea {} => product_uniform_cdf(x),
            Self::EllipseArea {} => product_uniform_cdf(x / ELLIPSE_SCALE),
            Self::NumericDensity(ref d) => d.cdf(x),
        }
    }

    /// `M(t) = ∫_0^t x dF(x)`.
    pub fn truncated_mean(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let t = t.min(self.support_sup());
        Ok(match *self {
            Self::UniformOn { b } => t * t / (2.0 * b),
            Self::ScaledUniformTop { k } => t * t * f64::from(k) / 2.0,
            Self::Exponential { rate } => {
                if t.is_infinite() {
                    1.0 / rate
                } else {
                    let rt = rate * t;
                    // 1 - e^{-rt}(1 + rt), written to avoid cancellation at small rt
                    (-(-rt).exp_m1() - rt * (-rt).exp()) / rate
                }
            }
            Self::RectangleArea {} => product_uniform_truncated_mean(t),
            Self::EllipseArea {} => {
                ELLIPSE_SCALE * product_uniform_truncated_mean(t / ELLIPSE_SCALE)
            }
            Self::NumericDensity(ref d) => return d.truncated_mean(t),
        })
    }

    /// `M(support_sup)`; may be infinite only for a numeric law with a heavy tail.
    pub fn total_mean(&self) -> Result<f64> {
        match *self {
            Self::UniformOn { b } => Ok(b / 2.0),
            Self::ScaledUniformTop { k } => Ok(0.5 / f64::from(k)),
            Self::Exponential { rate } => Ok(1.0 / rate),
            Self::RectangleArea {} => Ok(0.25),
            Self::EllipseArea {} => Ok(ELLIPSE_SCALE / 4.0),
            Self::NumericDensity(ref d) => d.total_mean(),
        }
    }

    /// One draw by inversion or direct construction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::UniformOn { b } => b * rng.random::<f64>(),
            Self::ScaledUniformTop { k } => rng.random::<f64>() / f64::from(k),
            Self::Exponential { rate } => -(-rng.random::<f64>()).ln_1p() / rate,
            Self::RectangleArea {} => rng.random::<f64>() * rng.random::<f64>(),
            Self::EllipseArea {} => {
                let a = 0.5 * rng.random::<f64>();
                let b = 0.5 * rng.random::<f64>();
                PI * a * b
            }
            Self::NumericDensity(ref d) => d.quantile(rng.random::<f64>()),
        }
    }

    /// The law of `c·X`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0 && c.is_finite(), "scale must be positive");
        match *self {
            Self::UniformOn { b } => Self::UniformOn { b: b * c },
            Self::ScaledUniformTop { k } => Self::UniformOn {
                b: c / f64::from(k),
            },
            Self::Exponential { rate } => Self::Exponential { rate: rate / c },
            _ => {
                let base = self.clone();
                Self::numeric(move |x| base.density(x / c) / c, self.support_sup() * c)
            }
        }
    }
}

/// `P(XY ≤ u) = u(1 - ln u)` for independent standard uniforms.
fn product_uniform_cdf(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * (1.0 - u.ln())
    }
}

/// `∫_0^t x·(-ln x) dx = t²/4 - (t²/2) ln t`.
fn product_uniform_truncated_mean(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        0.25
    } else {
        let t2 = t * t;
        t2 / 4.0 - 0.5 * t2 * t.ln()
    }
}

/// A law given only by its density on `[0, support_sup]`.
#[derive(Clone)]
pub struct NumericDensity {
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support_sup: f64,
    pub quad: QuadConfig,
}

impl NumericDensity {
    pub fn new<F>(density: F, support_sup: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            density: Arc::new(density),
            support_sup,
            quad: QuadConfig::default(),
        }
    }

    pub fn with_quad(mut self, quad: QuadConfig) -> Self {
        self.quad = quad;
        self
    }

    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x)
    }

    /// Total on `x ≥ 0`. If adaptive quadrature misses its tolerance, the
    /// value comes from a fixed 2^16-panel Simpson rule instead.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.support_sup {
            return 1.0;
        }
        let f = &self.density;
        let v = integrate_from_origin(|y| f(y), x, self.quad)
            .unwrap_or_else(|_| composite_simpson_from_origin(|y| f(y), x, 1 << 16));
        v.clamp(0.0, 1.0)
    }

    pub fn truncated_mean(&self, t: f64) -> Result<f64> {
        let t = t.min(self.support_sup);
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t.is_infinite() {
            return self.total_mean();
        }
        let f = &self.density;
        integrate_from_origin(|y| y * f(y), t, self.quad)
    }

    pub fn total_mean(&self) -> Result<f64> {
        if self.support_sup.is_finite() {
            return self.truncated_mean(self.support_sup);
        }
        let f = &self.density;
        let head = integrate_from_origin(|y| y * f(y), 1.0, self.quad)?;
        // tail ∫_1^∞ x f(x) dx with x = 1/w
        let tail = integrate_with(
            |w| {
                if w <= 0.0 {
                    0.0
                } else {
                    let v = f(1.0 / w) / (w * w * w);
                    if v.is_finite() {
                        v
                    } else {
                        0.0
                    }
                }
            },
            0.0,
            1.0,
            self.quad,
        )?;
        Ok(head + tail)
    }

    /// Inverse CDF by Brent iteration on the quadrature CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let mut hi = if self.support_sup.is_finite() {
            self.support_sup
        } else {
            1.0
        };
        while self.cdf(hi) < u && hi.is_finite() && hi < 1e300 {
            hi *= 2.0;
        }
        brent(|x| self.cdf(x) - u, 0.0, hi, 1e-13, 200)
            .map(|r| r.x)
            .unwrap_or(hi)
    }
}

fn composite_simpson_from_origin<F: Fn(f64) -> f64>(g: F, t: f64, panels: usize) -> f64 {
    let h = 1.0 / panels as f64;
    let eval = |v: f64| {
        if v <= 0.0 {
            0.0
        } else {
            g(t * v * v) * 2.0 * t * v
        }
    };
    let mut acc = eval(0.0) + eval(1.0);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * eval(i as f64 * h);
    }
    acc * h / 3.0
}

impl fmt::Debug for NumericDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumericDensity")
            .field("support_sup", &self.support_sup)
            .field("quad", &self.quad)
            .finish_non_exhaustive()
    }
}

impl PartialEq for NumericDensity {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.density, &other.density)
            && self.support_sup == other.support_sup
            && self.quad == other.quad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn named_families() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::standard_uniform(),
            DistributionSpec::uniform(3.0),
            DistributionSpec::scaled_uniform_top(4),
            DistributionSpec::exponential(1.0),
            DistributionSpec::exponential(2.5),
            DistributionSpec::rectangle_area(),
            DistributionSpec::ellipse_area(),
        ]
    }

    /// Numeric twin of a named family, built from its density alone.
    fn numeric_twin(d: &DistributionSpec) -> DistributionSpec {
        let base = d.clone();
        DistributionSpec::numeric(move |x| base.density(x), d.support_sup())
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(DistributionSpec::standard_uniform().cdf(0.3), 0.3);
        let r = DistributionSpec::rectangle_area().cdf(0.5);
        assert!((r - 0.5 * (1.0 - 0.5f64.ln())).abs() < 1e-15);
        assert!((r - 0.84657).abs() < 5e-6);
        for d in named_families() {
            assert_eq!(d.cdf(0.0), 0.0);
        }
    }

    #[test]
    fn truncated_mean_examples() {
        let u = DistributionSpec::standard_uniform();
        assert!((u.truncated_mean(0.2).unwrap() - 0.02).abs() < 1e-15);
        let e = DistributionSpec::exponential(1.0);
        assert_eq!(e.truncated_mean(0.0).unwrap(), 0.0);
        for t in [0.01f64, 0.5, 1.0, 3.0, 20.0] {
            let expect = 1.0 - (-t).exp() * (t + 1.0);
            assert!((e.truncated_mean(t).unwrap() - expect).abs() < 1e-14);
        }
        // frozen from the antiderivative t²/4 - (t²/2) ln t, cross-checked below
        let r = DistributionSpec::rectangle_area()
            .truncated_mean(0.1)
            .unwrap();
        assert!((r - 0.014_012_925_464_970_23).abs() < 1e-15);
        let q = integrate_from_origin(|x| -x * x.ln(), 0.1, QuadConfig::default()).unwrap();
        assert!((r - q).abs() < 1e-10);
    }

    #[test]
    fn total_mean_examples() {
        assert_eq!(
            DistributionSpec::standard_uniform().total_mean().unwrap(),
            0.5
        );
        assert_eq!(
            DistributionSpec::scaled_uniform_top(4)
                .total_mean()
                .unwrap(),
            0.125
        );
        let m = DistributionSpec::ellipse_area().total_mean().unwrap();
        assert!((m - PI / 16.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = DistributionSpec::ellipse_area();
        let n = 200_000;
        let mc: f64 = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        // sd of πAB is about 0.16, so 5 standard errors is under 2e-3
        assert!((mc - PI / 16.0).abs() < 2e-3, "mc mean {mc}");
    }

    #[test]
    fn exponential_total_mean_matches_quadrature() {
        for rate in [0.5, 1.0, 4.0] {
            let d = DistributionSpec::exponential(rate);
            let q = integrate_from_origin(|x| x * d.density(x), 40.0 / rate, QuadConfig::default())
                .unwrap();
            assert!((d.total_mean().unwrap() - q).abs() < 1e-9);
            assert!((d.truncated_mean(f64::INFINITY).unwrap() - 1.0 / rate).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_forms_match_numeric_twins() {
        for d in named_families() {
            let twin = numeric_twin(&d);
            let sup = d.support_sup().min(12.0);
            for i in 0..=40 {
                let t = sup * i as f64 / 40.0;
                let a = d.truncated_mean(t).unwrap();
                let b = twin.truncated_mean(t).unwrap();
                assert!((a - b).abs() <= 1e-8, "{} t={t}: {a} vs {b}", d.family());
                assert!(
                    (d.cdf(t) - twin.cdf(t)).abs() <= 1e-8,
                    "{} cdf t={t}",
                    d.family()
                );
            }
            let ta = d.total_mean().unwrap();
            let tb = twin.total_mean().unwrap();
            assert!((ta - tb).abs() <= 1e-8, "{} total {ta} vs {tb}", d.family());
        }
    }

    #[test]
    fn moment_invariants_on_grid() {
        for d in named_families() {
            let sup = d.support_sup().min(15.0);
            let mut prev = 0.0;
            let mut prev_cdf = 0.0;
            for i in 0..=1000 {
                let t = sup * i as f64 / 1000.0;
                let m = d.truncated_mean(t).unwrap();
                let f = d.cdf(t);
                assert!(m >= prev, "{} not monotone at {t}", d.family());
                assert!(f >= prev_cdf);
                assert!(m <= t * f + 1e-15, "{} M(t) > tF(t) at {t}", d.family());
                prev = m;
                prev_cdf = f;
            }
            if d.support_sup().is_finite() {
                let s = d.support_sup();
                assert_eq!(d.cdf(s), 1.0);
                assert!((d.truncated_mean(s).unwrap() - d.total_mean().unwrap()).abs() < 1e-15);
            }
        }
    }

    fn ks_distance(d: &DistributionSpec, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = d.cdf(x);
                (f - i as f64 / n as f64)
                    .abs()
                    .max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn samples_match_cdf() {
        for (i, d) in named_families().into_iter().enumerate() {
            let ks = ks_distance(&d, 100_000, 100 + i as u64);
            assert!(ks < 0.01, "{}: KS {ks}", d.family());
        }
    }

    #[test]
    fn numeric_sampler_by_inversion() {
        let twin = numeric_twin(&DistributionSpec::rectangle_area());
        let ks = ks_distance(&twin, 20_000, 5);
        assert!(ks < 0.015, "KS {ks}");
    }

    #[test]
    fn uniform_draws_distinct_and_in_support() {
        let d = DistributionSpec::standard_uniform();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = d.sample(&mut rng);
        let b = d.sample(&mut rng);
        assert_ne!(a, b);
        assert!((0.0..1.0).contains(&a) && (0.0..1.0).contains(&b));
    }

    #[test]
    fn exponential_sample_mean() {
        let d = DistributionSpec::exponential(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mean = (0..100_000).map(|_| d.sample(&mut rng)).sum::<f64>() / 1e5;
        assert!((mean - 1.0).abs() < 0.02);
    }

    #[test]
    fn scaled_laws() {
        let d = DistributionSpec::rectangle_area().scaled(2.0);
        assert!((d.cdf(1.0) - product_uniform_cdf(0.5)).abs() < 1e-9);
        assert!((d.total_mean().unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(
            DistributionSpec::scaled_uniform_top(4).scaled(2.0),
            DistributionSpec::uniform(0.5)
        );
    }

    #[test]
    fn validation() {
        assert!(DistributionSpec::uniform(0.0).validate().is_err());
        assert!(DistributionSpec::exponential(-1.0).validate().is_err());
        assert!(DistributionSpec::scaled_uniform_top(0).validate().is_err());
        assert!(DistributionSpec::ellipse_area().validate().is_ok());
    }

    #[test]
    fn json_shape() {
        let d = DistributionSpec::exponential(2.0);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"family":"exponential","params":{"rate":2.0}}"#);
        let back: DistributionSpec =
            serde_json::from_str(r#"{"family":"rectangle_area","params":{}}"#).unwrap();
        assert_eq!(back, DistributionSpec::rectangle_area());
        let u: DistributionSpec =
            serde_json::from_str(r#"{"family":"uniform","params":{"b":1}}"#).unwrap();
        assert_eq!(u, DistributionSpec::standard_uniform());
        assert!(serde_json::to_string(&numeric_twin(&u)).is_err());
    }
}
