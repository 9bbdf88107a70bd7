//! Zeros of functions in `Θ_n(c)` modulo `q^ℤ`.
//!
//! A member of `Θ_n(c)` has exactly `n` zeros in any annulus
//! `|q|s < |y| <= s`. They are counted with the argument principle on the
//! two boundary circles and then located by Newton iteration from a grid.

use rayon::prelude::*;

use crate::error::{QError, Result};
use crate::qcore::{QContext, C64};
use crate::thetaspaces::SampledFunction;

/// Nodes per boundary circle for the winding count.
pub const WINDING_NODES: usize = 512;
/// Seed grid: arguments by moduli.
pub const SEED_ARGS: usize = 24;
pub const SEED_MODULI: usize = 8;
pub const NEWTON_MAX_ITER: usize = 60;
/// Two zeros belong to one class when their ratio is this close to a power of `q`.
pub const CLASS_TOL: f64 = 1e-8;

/// Zeros of a theta-type function, reduced into the annulus `|q|s < |y| <= s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSet {
    pub zeros: Vec<C64>,
    /// Outer radius `s` of the counting annulus.
    pub radius: f64,
    pub winding: i64,
    /// `max |f|` on the outer circle, the scale for zero residuals.
    pub scale: f64,
}

fn circle(radius: f64, n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| C64::from_polar(radius, std::f64::consts::TAU * k as f64 / n as f64))
        .collect()
}

fn eval_all(f: &SampledFunction, pts: &[C64]) -> Result<Vec<C64>> {
    pts.par_iter().map(|&y| f.eval(y)).collect()
}

/// Winding number of the closed sampled curve around 0, or `None` when a
/// step turns by more than a quarter turn and the count is unreliable.
fn winding(values: &[C64]) -> Option<i64> {
    let mut total = 0.0;
    for k in 0..values.len() {
        let a = values[k];
        let b = values[(k + 1) % values.len()];
        let step = (b / a).arg();
        if !step.is_finite() || step.abs() > std::f64::consts::FRAC_PI_2 {
            return None;
        }
        total += step;
    }
    Some((total / std::f64::consts::TAU).round() as i64)
}

/// Picks the outer radius whose circle stays furthest from the zeros,
/// judged by `min |f| / max |f|` on a coarse ring.
fn choose_radius(f: &SampledFunction, ctx: &QContext) -> Result<f64> {
    let aq = ctx.q().norm();
    let mut best = (f64::NEG_INFINITY, 1.0);
    for k in 0..12 {
        let s = aq.powf(k as f64 / 12.0);
        let vals = eval_all(f, &circle(s, 64))?;
        let lo = vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        let hi = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let score = if hi > 0.0 { lo / hi } else { 0.0 };
        if score > best.0 {
            best = (score, s);
        }
    }
    Ok(best.1)
}

/// Newton iteration with a central-difference derivative.
///
/// When rounding noise keeps the step from dropping below `1e-14 |y|`, an
/// iterate whose last step was under `1e-10 |y|` is still accepted.
pub fn newton(f: &SampledFunction, y0: C64, max_iter: usize) -> Result<Option<C64>> {
    let mut y = y0;
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let h = y.norm() * 1e-6;
        let fy = f.eval(y)?;
        let d = (f.eval(y + h)? - f.eval(y - h)?) / (2.0 * h);
        if d.norm() == 0.0 || !d.is_finite() {
            return Ok(None);
        }
        let mut step = fy / d;
        let cap = 0.25 * y.norm();
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        y -= step;
        if !y.is_finite() || y.norm() < 1e-12 {
            return Ok(None);
        }
        last = step.norm() / y.norm();
        if last < 1e-14 {
            return Ok(Some(y));
        }
    }
    Ok((last < 1e-10).then_some(y))
}

/// Finds the `n` zero classes of `f ∈ Θ_n(c)`.
pub fn theta_zeros(f: &SampledFunction, n: usize, ctx: &QContext) -> Result<ZeroSet> {
    let aq = ctx.q().norm();
    let radius = choose_radius(f, ctx)?;
    let outer = eval_all(f, &circle(radius, WINDING_NODES))?;
    let inner = eval_all(f, &circle(radius * aq, WINDING_NODES))?;
    let scale = outer.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let count = match (winding(&outer), winding(&inner)) {
        (Some(o), Some(i)) => o - i,
        _ => {
            return Err(QError::ZeroCountMismatch {
                expected: n,
                found: f64::NAN,
            })
        }
    };
    if count != n as i64 {
        return Err(QError::ZeroCountMismatch {
            expected: n,
            found: count as f64,
        });
    }
    let anchor = C64::new(1.0 / radius, 0.0);

    // grid in the annulus, most promising seeds first
    let mut seeds: Vec<C64> = (0..SEED_MODULI)
        .flat_map(|i| {
            let m = radius * aq.powf((i as f64 + 0.5) / SEED_MODULI as f64);
            (0..SEED_ARGS).map(move |k| C64::from_polar(m, std::f64::consts::TAU * (k as f64 + 0.5) / SEED_ARGS as f64))
        })
        .collect();
    let mags: Vec<f64> = eval_all(f, &seeds)?.iter().map(|v| v.norm()).collect();
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by(|&i, &j| mags[i].total_cmp(&mags[j]));
    seeds = order.into_iter().map(|i| seeds[i]).collect();

    let mut zeros: Vec<C64> = Vec::with_capacity(n);
    let mut stalled = false;
    for seed in seeds {
        if zeros.len() == n {
            break;
        }
        let Some(root) = newton(f, seed, NEWTON_MAX_ITER)? else {
            stalled = true;
            continue;
        };
        if f.eval(root)?.norm() > 1e-8 * scale {
            stalled = true;
            continue;
        }
        let (root, _) = ctx.reduce_to_band(root, anchor);
        if !zeros.iter().any(|&z| ctx.same_q_class(z, root, CLASS_TOL)) {
            zeros.push(root);
        }
    }
    if zeros.len() < n {
        return Err(if stalled {
            QError::NewtonStall(format!("found {} of {n} zero classes", zeros.len()))
        } else {
            QError::ZeroCountMismatch {
                expected: n,
                found: zeros.len() as f64,
            }
        });
    }
    Ok(ZeroSet {
        zeros,
        radius,
        winding: count,
        scale,
    })
}

/// `Π rep_j · c`, whose nearest power of `q` is the product-relation exponent.
pub fn product_exponent(zeros: &[C64], c: C64, ctx: &QContext) -> (i64, f64) {
    let p: C64 = zeros.iter().product::<C64>() * c;
    ctx.nearest_q_power(p)
}

/// Zeros with `Π ρ_j = 1/c` exactly: the first one is rescaled by `q^{-k}`.
pub fn normalize_product(zeros: &mut [C64], c: C64, ctx: &QContext) -> i64 {
    let (k, _) = product_exponent(zeros, c, ctx);
    if let Some(first) = zeros.first_mut() {
        *first *= ctx.qpow(-k);
    }
    k
}
