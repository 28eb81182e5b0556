//! Adaptive Simpson quadrature.

use crate::error::{BrsError, Result};

/// Absolute tolerance used for every moment integral in the crate.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Maximum bisection depth before giving up.
pub const DEFAULT_MAX_DEPTH: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub tolerance: f64,
    pub max_depth: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Integrates `f` over `[a, b]` with the default configuration.
pub fn integrate<F>(f: F, a: f64, b: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_with(f, a, b, QuadConfig::default())
}

/// Integrates `f` over `[a, b]` by recursive Simpson bisection with
/// Richardson correction. Fails if any branch hits `max_depth` before its
/// share of the tolerance is met.
pub fn integrate_with<F>(f: F, a: f64, b: f64, config: QuadConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate_with(f, b, a, config).map(|v| -v);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut failed = false;
    let value = recurse(
        &f,
        Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole,
        },
        config.tolerance,
        config.max_depth,
        &mut failed,
    );
    if failed || !value.is_finite() {
        return Err(BrsError::QuadratureFailure {
            lo: a,
            hi: b,
            tolerance: config.tolerance,
        });
    }
    Ok(value)
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn recurse<F>(f: &F, p: Panel, tol: f64, depth: u32, failed: &mut bool) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let delta = left + right - p.whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *failed = true;
        return left + right + delta / 15.0;
    }
    let lhs = recurse(
        f,
        Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
        },
        0.5 * tol,
        depth - 1,
        failed,
    );
    let rhs = recurse(
        f,
        Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
        },
        0.5 * tol,
        depth - 1,
        failed,
    );
    lhs + rhs
}

/// `∫_0^t g(x) dx` through the substitution `x = t v²`, which removes
/// integrable singularities of `g` at the origin. `g` is never evaluated at 0.
pub fn integrate_from_origin<F>(g: F, t: f64, config: QuadConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if t <= 0.0 {
        return Ok(0.0);
    }
    integrate_with(
        |v| {
            if v <= 0.0 {
                0.0
            } else {
                g(t * v * v) * 2.0 * t * v
            }
        },
        0.0,
        1.0,
        config,
    )
    .map_err(|_| BrsError::QuadratureFailure {
        lo: 0.0,
        hi: t,
        tolerance: config.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = integrate(f64::exp, 0.0, 1.0).unwrap();
        let b = integrate(f64::exp, 1.0, 0.0).unwrap();
        assert!((a + b).abs() < 1e-15);
        assert!((a - (std::f64::consts::E - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn log_singularity_via_substitution() {
        // ∫_0^t -ln x dx = t (1 - ln t)
        let t = 0.3_f64;
        let v = integrate_from_origin(|x| -x.ln(), t, QuadConfig::default()).unwrap();
        assert!((v - t * (1.0 - t.ln())).abs() < 1e-9);
    }

    #[test]
    fn jump_inside_interval_fails() {
        let cfg = QuadConfig {
            tolerance: 1e-14,
            max_depth: 12,
        };
        let r = integrate_with(|x| if x < 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, cfg);
        assert!(matches!(r, Err(BrsError::QuadratureFailure { .. })));
    }
}
