//! Numerical factorization `ψ*(x, y) = A(x) Π_j θ(y/ρ_j(x))` and the relations
//! between `A` and `ρ` for the general `_2ψ_2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::elliptic::jacobi_inverse;
use crate::error::{QError, Result};
use crate::qcore::{qpoch_inf, theta, QContext, C64, ONE};
use crate::roots::{newton, normalize_product, product_exponent, theta_zeros, NEWTON_MAX_ITER};
use crate::series::{psi_star_extended, w_star, w_star_sum, SeriesSpec, WSpec};
use crate::thetaspaces::SampledFunction;
use crate::wronskian::ratio_pochhammer;

/// Tolerance for the product relation `Π ρ_j · a_1⋯a_r x ∈ q^ℤ`.
pub const PRODUCT_TOL: f64 = 1e-8;
/// Probes closer than this (in log space) to a zero class are rejected.
pub const PROBE_CLEARANCE: f64 = 1e-2;
/// Largest term-scale to value ratio accepted at a W-fit probe.
pub const PROBE_CONDITION: f64 = 1e4;
const PROBE_SEED: u64 = 0x5eed_a0a0;
const PROBE_DRAWS: usize = 100;
const PROBES: usize = 3;

/// A zero of `y ↦ ψ*(x, y)` modulo `q^ℤ`, with the band `lo < |rep| <= hi`
/// (`hi/lo = 1/|q|`) that contains its representative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoClass {
    pub rep: C64,
    pub modulus_band: (f64, f64),
}

impl RhoClass {
    /// Keeps `rep` as given and records the band of the lattice `anchor^{-1} |q|^ℤ` around it.
    pub fn from_rep(rep: C64, anchor: C64, ctx: &QContext) -> Self {
        let aq = ctx.q().norm();
        let t = (rep * anchor).norm().ln() / aq.ln();
        let m = t.floor();
        let hi = aq.powf(m) / anchor.norm();
        RhoClass {
            rep,
            modulus_band: (hi * aq, hi),
        }
    }

    pub fn same_class(&self, other: &RhoClass, ctx: &QContext) -> bool {
        ctx.same_q_class(self.rep, other.rep, PRODUCT_TOL)
    }

    /// Relative distance from `rep/y` to the nearest power of `q`.
    pub fn mismatch(&self, y: C64, ctx: &QContext) -> f64 {
        ctx.nearest_q_power(self.rep / y).1
    }
}

/// `A`, the zero classes, and the worst reconstruction error at fresh points.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationResult {
    pub a: C64,
    pub rhos: Vec<RhoClass>,
    pub residual: f64,
    pub x: C64,
}

impl FactorizationResult {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.residual < tol
    }
}

/// The continuation of one zero along a path in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTrack {
    pub base_x: C64,
    pub path: Vec<C64>,
    pub rho_along_path: Vec<C64>,
}

fn psi_in_y(spec: &SeriesSpec, x: C64, ctx: &QContext) -> SampledFunction {
    let (s, c) = (spec.clone(), *ctx);
    SampledFunction::new(format!("psi*({x}, y)"), move |y| psi_star_extended(&s, x, y, &c))
}

fn band_anchor(spec: &SeriesSpec, x: C64) -> C64 {
    if spec.r() == 2 {
        (spec.a_product() * x).sqrt()
    } else {
        ONE
    }
}

/// The `r` zero classes of `y ↦ ψ*(x, y)`.
///
/// Representatives are reduced into `|q| < |ρ√(a_1a_2x)| <= 1` for `r = 2`
/// and `|q| < |ρ| <= 1` otherwise, then the smallest one is rescaled so that
/// `Π ρ_j = 1/(a_1⋯a_r x)` holds exactly. For `r = 2` this yields the pair
/// `(ρ, 1/(a_1a_2xρ))` with `|ρ√(a_1a_2x)| >= 1`.
pub fn find_rhos(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<Vec<RhoClass>> {
    let r = spec.r();
    let f = psi_in_y(spec, x, ctx);
    let found = theta_zeros(&f, r, ctx)?;
    let anchor = band_anchor(spec, x);
    let mut reps: Vec<C64> = found.zeros.iter().map(|&z| ctx.reduce_to_band(z, anchor).0).collect();
    reps.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    let c = spec.a_product() * x;
    let (_, err) = product_exponent(&reps, c, ctx);
    if err > PRODUCT_TOL {
        return Err(QError::Inconsistent(format!(
            "zero product misses q^Z by {err:e} at x = {x}"
        )));
    }
    normalize_product(&mut reps, c, ctx);
    Ok(reps.into_iter().map(|z| RhoClass::from_rep(z, anchor, ctx)).collect())
}

fn draw_probes(rng: &mut ChaCha8Rng, avoid: &[C64], count: usize, ctx: &QContext) -> Result<Vec<C64>> {
    let lq = ctx.q().norm().ln();
    let mut out = Vec::with_capacity(count);
    for _ in 0..PROBE_DRAWS {
        let m = (lq * rng.random::<f64>()).exp();
        let y = C64::from_polar(m, std::f64::consts::TAU * rng.random::<f64>());
        if avoid.iter().all(|&z| ctx.lattice_log_distance(y, z) >= PROBE_CLEARANCE) {
            out.push(y);
            if out.len() == count {
                return Ok(out);
            }
        }
    }
    Err(QError::ProbeDegenerate(format!(
        "{} of {count} probes after {PROBE_DRAWS} draws",
        out.len()
    )))
}

/// `A` from explicit representatives with `Π ρ_j = 1/(a_1⋯a_r x)`.
pub fn a_from_reps(spec: &SeriesSpec, x: C64, reps: &[C64], ctx: &QContext) -> Result<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let probes = draw_probes(&mut rng, reps, PROBES, ctx)?;
    let mut values = Vec::with_capacity(PROBES);
    for y in probes {
        let den = reps
            .iter()
            .try_fold(ONE, |acc, &z| Ok::<_, QError>(acc * theta(y / z, ctx)?))?;
        values.push(psi_star_extended(spec, x, y, ctx)? / den);
    }
    let a0 = values[0];
    let spread = values.iter().map(|v| (v - a0).norm()).fold(0.0, f64::max) / a0.norm();
    if !(spread < 1e-8) {
        return Err(QError::Inconsistent(format!(
            "A differs by {spread:e} between probes at x = {x}"
        )));
    }
    Ok(a0)
}

/// `A(x)` for the classes returned by `find_rhos`.
pub fn extract_a(spec: &SeriesSpec, x: C64, rhos: &[RhoClass], ctx: &QContext) -> Result<C64> {
    let reps: Vec<C64> = rhos.iter().map(|c| c.rep).collect();
    a_from_reps(spec, x, &reps, ctx)
}

/// Full factorization with a reconstruction check at 20 fresh points.
pub fn factorize(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<FactorizationResult> {
    let rhos = find_rhos(spec, x, ctx)?;
    let a = extract_a(spec, x, &rhos, ctx)?;
    let reps: Vec<C64> = rhos.iter().map(|c| c.rep).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED ^ 0xffff);
    let mut residual = 0.0f64;
    for y in draw_probes(&mut rng, &reps, 20, ctx)? {
        let want = psi_star_extended(spec, x, y, ctx)?;
        let got = reps
            .iter()
            .try_fold(a, |acc, &z| Ok::<_, QError>(acc * theta(y / z, ctx)?))?;
        residual = residual.max((got - want).norm() / want.norm());
    }
    Ok(FactorizationResult { a, rhos, residual, x })
}

/// Smallest step, as a fraction of the whole path, before tracking gives up.
pub const MIN_TRACK_STEP: f64 = 1e-7;

/// Continues the zero `rho_start` of `ψ*(x_from, ·)` along the straight
/// log-space path to `x_to`.
///
/// At most `1/16` of the path (and at most `0.05` in `log x`) is covered per
/// step. Each step predicts by linear extrapolation and corrects by Newton;
/// a step whose corrector lands more than `0.1|ρ|` from the prediction, or
/// moves `ρ` by more than `0.5|ρ|`, is halved. `BranchJump` is raised when
/// the step length falls below `MIN_TRACK_STEP`.
pub fn track_rho_path(
    spec: &SeriesSpec,
    x_from: C64,
    x_to: C64,
    rho_start: C64,
    ctx: &QContext,
) -> Result<BranchTrack> {
    let span = (x_to / x_from).ln();
    let max_h = 1.0 / 16f64.max((span.norm() / 0.05).ceil());
    let mut track = BranchTrack {
        base_x: x_from,
        path: vec![x_from],
        rho_along_path: vec![rho_start],
    };
    if x_to == x_from {
        return Ok(track);
    }
    let (mut t, mut h) = (0.0f64, max_h);
    let mut rho = rho_start;
    let mut slope: Option<C64> = None;
    while t < 1.0 {
        let step = h.min(1.0 - t);
        let xk = x_from * (span * (t + step)).exp();
        let predicted = slope.map_or(rho, |d| rho + d * step);
        let f = psi_in_y(spec, xk, ctx);
        let accepted = newton(&f, predicted, NEWTON_MAX_ITER)?
            .filter(|&next| (next - predicted).norm() <= 0.1 * rho.norm() && (next - rho).norm() <= 0.5 * rho.norm());
        match accepted {
            Some(next) => {
                slope = Some((next - rho) / step);
                rho = next;
                t += step;
                if 1.0 - t < 1e-12 {
                    t = 1.0;
                }
                track.path.push(if t == 1.0 { x_to } else { xk });
                track.rho_along_path.push(rho);
                h = (h * 1.5).min(max_h);
            }
            None => {
                h *= 0.5;
                if h < MIN_TRACK_STEP {
                    return Err(QError::BranchJump(format!(
                        "no coherent continuation of ρ = {rho} beyond x = {}",
                        x_from * (span * t).exp()
                    )));
                }
            }
        }
    }
    Ok(track)
}

pub fn track_rho(spec: &SeriesSpec, x_from: C64, x_to: C64, rho_start: C64, ctx: &QContext) -> Result<C64> {
    let t = track_rho_path(spec, x_from, x_to, rho_start, ctx)?;
    Ok(*t.rho_along_path.last().unwrap_or(&rho_start))
}

fn check_r2(spec: &SeriesSpec) -> Result<()> {
    if spec.r() != 2 {
        return Err(QError::Domain(format!("expected a 2psi2 spec, got r = {}", spec.r())));
    }
    Ok(())
}

/// `ρ(x/q), ρ(x), ρ(qx), ρ(q²x), ρ(q³x)` on the branch continued from
/// `ρ(1) = 1/a_1`.
pub fn coherent_rhos(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<[C64; 5]> {
    check_r2(spec)?;
    let q = ctx.q();
    let rho_x = track_rho(spec, ONE, x, ONE / spec.a()[0], ctx)?;
    let rho_m = track_rho(spec, x, x / q, rho_x, ctx)?;
    let mut out = [rho_m, rho_x, rho_x, rho_x, rho_x];
    for k in 2..5 {
        let from = x * q.powi(k as i32 - 2);
        out[k] = track_rho(spec, from, from * q, out[k - 1], ctx)?;
    }
    Ok(out)
}

/// `A` at `x` for the `_2ψ_2` factorization `A θ(y/ρ) θ(a_1a_2xyρ)`.
pub fn a_for_rho(spec: &SeriesSpec, x: C64, rho: C64, ctx: &QContext) -> Result<C64> {
    a_from_reps(spec, x, &[rho, ONE / (spec.a_product() * x * rho)], ctx)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

/// Right-hand side of the closed expression for `A(x)²` in terms of
/// `ρ(x/q), ρ(x), ρ(qx)`.
pub fn a_squared_from_rho(spec: &SeriesSpec, x: C64, rm: C64, r0: C64, r1: C64, ctx: &QContext) -> Result<C64> {
    let (a, b) = (spec.a(), spec.b());
    let c = spec.a_product() * x;
    let t = |v: C64| theta(v, ctx);
    let pre = c * r0 * qpoch_inf(x, ctx)? * qpoch_inf(spec.balance() / x, ctx)? * ratio_pochhammer(spec, ctx)?;
    let num = t(rm / r1)? * t(c * rm * r1)?;
    let den = ((a[0] + a[1]) * x - b[0] - b[1]) * t(rm / r0)? * t(r0 / r1)? * t(c * r0 * rm)? * t(c * r0 * r1)?;
    Ok(pre * num / den)
}

/// Relative residual of the closed `A(x)²` formula on tracked branches.
pub fn verify_a_rho_relation(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<f64> {
    let rh = coherent_rhos(spec, x, ctx)?;
    let a = a_for_rho(spec, x, rh[1], ctx)?;
    let rhs = a_squared_from_rho(spec, x, rh[0], rh[1], rh[2], ctx)?;
    Ok(rel(a * a, rhs))
}

fn track_via(spec: &SeriesSpec, waypoints: &[C64], rho: C64, ctx: &QContext) -> Result<C64> {
    waypoints
        .windows(2)
        .try_fold(rho, |r, w| track_rho(spec, w[0], w[1], r, ctx))
}

/// `A(x)²` from its closed expression with `ρ(x/q)` and `ρ(qx)` continued
/// through the upper half plane, so the branch is the same on a whole
/// neighbourhood of `x = 1`.
fn a_squared_near_one(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<C64> {
    let q = ctx.q();
    let lift = x * C64::from_polar(1.0, DETOUR_ARG);
    let r0 = track_rho(spec, ONE, x, ONE / spec.a()[0], ctx)?;
    let rm = track_via(spec, &[x, lift, lift / q, x / q], r0, ctx)?;
    let r1 = track_via(spec, &[x, lift, lift * q, x * q], r0, ctx)?;
    a_squared_from_rho(spec, x, rm, r0, r1, ctx)
}

/// Argument of the detour used to continue `ρ` off the real axis.
const DETOUR_ARG: f64 = 0.01;
const CIRCLE_NODES: usize = 32;

/// Relative gap between `A(1)² = ((B)_∞/(q)_∞)²` and the value of the closed
/// expression at `x = 1`, where it is a removable `0/0`.
///
/// The value at 1 is the mean over a circle around 1. A branch point of `ρ`
/// can sit very close to 1, so the radius is the one where the full mean and
/// the mean over every other node agree best.
pub fn verify_a_rho_relation_at_one(spec: &SeriesSpec, ctx: &QContext) -> Result<f64> {
    check_r2(spec)?;
    let mut best: Option<(f64, C64)> = None;
    for radius in [1e-5, 3e-6, 3e-5, 1e-4] {
        let vals = (0..CIRCLE_NODES)
            .into_par_iter()
            .map(|k| {
                let x = ONE + C64::from_polar(radius, std::f64::consts::TAU * (k as f64 + 0.5) / CIRCLE_NODES as f64);
                a_squared_near_one(spec, x, ctx)
            })
            .collect::<Result<Vec<C64>>>();
        let Ok(vals) = vals else { continue };
        let full = vals.iter().sum::<C64>() / CIRCLE_NODES as f64;
        let half = vals.iter().step_by(2).sum::<C64>() / (CIRCLE_NODES / 2) as f64;
        let spread = rel(full, half);
        if best.is_none_or(|(s, _)| spread < s) {
            best = Some((spread, full));
        }
        if spread < 1e-10 {
            break;
        }
    }
    let Some((_, limit)) = best else {
        return Err(QError::BranchJump("no circle around x = 1 could be tracked".into()));
    };
    let a1 = qpoch_inf(spec.balance(), ctx)? / ctx.q_inf();
    Ok(rel(a1 * a1, limit))
}

/// The three printed ratios `A(qx)/A(q²x)`, `A(q²x)/A(x)`, `A(x)/A(qx)` in
/// terms of `ρ(x), ρ(qx), ρ(q²x)`.
pub fn a_ratios_from_rho(spec: &SeriesSpec, x: C64, r0: C64, r1: C64, r2: C64, ctx: &QContext) -> Result<[C64; 3]> {
    let (a, b) = (spec.a(), spec.b());
    let q = ctx.q();
    let c = spec.a_product() * x;
    let t = |v: C64| theta(v, ctx);
    let lin = (a[0] + a[1]) * q * x - b[0] - b[1];
    let quad = spec.a_product() * q * x - b[0] * b[1];
    let one_qx = ONE - q * x;
    let r1_ratio = -r1 * one_qx * t(r0 / r2)? * t(c * r0 * r2)? / (r2 * r2 * lin * t(r0 / r1)? * t(c * r0 * r1)?);
    let r2_ratio = r2 * r2 * quad * t(r1 / r0)? * t(c * r0 * r1)? / (one_qx * t(r1 / r2)? * t(c * r1 * r2)?);
    let r3_ratio = lin * t(r2 / r1)? * t(c * r1 * r2)? / (r1 * quad * t(r2 / r0)? * t(c * r0 * r2)?);
    Ok([r1_ratio, r2_ratio, r3_ratio])
}

/// Residuals of the three `A`-ratio relations against extracted `A` values.
pub fn verify_a_ratio_relations(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<[f64; 3]> {
    let rh = coherent_rhos(spec, x, ctx)?;
    let q = ctx.q();
    let a0 = a_for_rho(spec, x, rh[1], ctx)?;
    let a1 = a_for_rho(spec, q * x, rh[2], ctx)?;
    let a2 = a_for_rho(spec, q * q * x, rh[3], ctx)?;
    let pred = a_ratios_from_rho(spec, x, rh[1], rh[2], rh[3], ctx)?;
    Ok([rel(a1 / a2, pred[0]), rel(a2 / a0, pred[1]), rel(a0 / a1, pred[2])])
}

/// Both sides of the functional equation for `ρ` at `ρ(x), …, ρ(q³x)`.
pub fn rho_functional_sides(spec: &SeriesSpec, x: C64, rh: &[C64; 4], ctx: &QContext) -> Result<(C64, C64)> {
    let (a, b) = (spec.a(), spec.b());
    let q = ctx.q();
    let c = spec.a_product() * x;
    let t = |v: C64| theta(v, ctx);
    let [r0, r1, r2, r3] = *rh;
    let lhs = t(r1 / r3)? * t(c * r1 * r3)? / (t(r2 / r3)? * t(c * r2 * r3)?);
    let bb = b[0] + b[1];
    let aa = a[0] + a[1];
    let rhs = (bb - aa * q * x) * (bb - aa * q * q * x) * t(r1 / r0)? * t(c * r0 * r1)?
        / ((ONE - q * x) * (b[0] * b[1] - spec.a_product() * q * q * x) * t(r2 / r0)? * t(c * r0 * r2)?);
    Ok((lhs, rhs))
}

/// Smallest modulus tolerated for the printed denominators `1 - qx` and
/// `b_1b_2 - a_1a_2q²x`.
pub const DENOMINATOR_GUARD: f64 = 1e-3;

pub fn verify_rho_functional_equation(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<f64> {
    check_r2(spec)?;
    let q = ctx.q();
    let d1 = (ONE - q * x).norm();
    let d2 = (spec.b_product() - spec.a_product() * q * q * x).norm();
    if d1 < DENOMINATOR_GUARD || d2 < DENOMINATOR_GUARD {
        return Err(QError::Domain(format!("denominator near zero at x = {x}")));
    }
    let rh = coherent_rhos(spec, x, ctx)?;
    let (lhs, rhs) = rho_functional_sides(spec, x, &[rh[1], rh[2], rh[3], rh[4]], ctx)?;
    Ok(rel(lhs, rhs))
}

/// `A(qx)/A(q²x)` from the first ratio relation at `x` against the same ratio
/// from the third relation at `qx`; their agreement is the functional equation.
pub fn ratio_shift_consistency(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<f64> {
    let rh = coherent_rhos(spec, x, ctx)?;
    let q = ctx.q();
    let at_x = a_ratios_from_rho(spec, x, rh[1], rh[2], rh[3], ctx)?[0];
    let at_qx = a_ratios_from_rho(spec, q * x, rh[2], rh[3], rh[4], ctx)?[2];
    Ok(rel(at_x, at_qx))
}

/// `ρ` from the elliptic-integral formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoIntegral {
    pub rho: RhoClass,
    /// `-ψ*(x, 1/√(a_1a_2x)) / ψ*(x, -1/√(a_1a_2x))`.
    pub upper_limit: C64,
    /// Relative defect of `θ(ρs)²/θ(-ρs)² = upper_limit`, `s = √(a_1a_2x)`.
    pub quotient_residual: f64,
}

pub fn rho_via_integral(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<RhoIntegral> {
    check_r2(spec)?;
    let s = (spec.a_product() * x).sqrt();
    let num = psi_star_extended(spec, x, ONE / s, ctx)?;
    let den = psi_star_extended(spec, x, -ONE / s, ctx)?;
    if den.norm() < 1e-300 {
        return Err(QError::NearBranchPoint(format!("ψ*(x, -1/√(a1a2x)) = 0 at x = {x}")));
    }
    let upper = -num / den;
    let w = jacobi_inverse(upper, ctx)?;
    let rho = w / s;
    let tp = theta(rho * s, ctx)?;
    let tm = theta(-rho * s, ctx)?;
    let quotient = tp * tp / (tm * tm);
    Ok(RhoIntegral {
        rho: RhoClass::from_rep(rho, s, ctx),
        upper_limit: upper,
        quotient_residual: rel(quotient, upper),
    })
}

/// Smallest class mismatch between `rho` and the pair `{ρ, 1/(a_1a_2xρ)}`
/// represented by `classes`, allowing either member.
pub fn pair_mismatch(spec: &SeriesSpec, x: C64, rho: C64, classes: &[RhoClass], ctx: &QContext) -> f64 {
    let partner = ONE / (spec.a_product() * x * rho);
    classes
        .iter()
        .flat_map(|c| [c.mismatch(rho, ctx), c.mismatch(partner, ctx)])
        .fold(f64::INFINITY, f64::min)
}

/// Relative residual of `ψ*(x, y) = ψ*(x, q/(a_1a_2xy))`.
pub fn verify_bailey_symmetry(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<f64> {
    check_r2(spec)?;
    let lhs = psi_star_extended(spec, x, y, ctx)?;
    let rhs = psi_star_extended(spec, x, ctx.q() / (spec.a_product() * x * y), ctx)?;
    let scale = lhs.norm().max(rhs.norm());
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).norm() / scale })
}

/// Image of `(spec, x)` under `(a_2, b_2, x) ↦ (a_1a_2x/b_2, a_1x, b_2/a_1)`.
pub fn bailey_substitution(spec: &SeriesSpec, x: C64) -> Result<(SeriesSpec, C64)> {
    check_r2(spec)?;
    let (a, b) = (spec.a(), spec.b());
    if b[1] == C64::new(0.0, 0.0) {
        return Err(QError::Domain("substitution needs b_2 != 0".into()));
    }
    let image = SeriesSpec::new(vec![a[0], a[0] * a[1] * x / b[1]], vec![b[0], a[0] * x])?;
    Ok((image, b[1] / a[0]))
}

/// Worst class mismatch between the zero sets before and after the substitution.
pub fn bailey_zero_set_residual(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<f64> {
    let before = find_rhos(spec, x, ctx)?;
    let (image, x2) = bailey_substitution(spec, x)?;
    let after = find_rhos(&image, x2, ctx)?;
    let one_way = |p: &[RhoClass], s: &[RhoClass]| {
        p.iter()
            .map(|c| s.iter().map(|d| c.mismatch(d.rep, ctx)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(one_way(&before, &after).max(one_way(&after, &before)))
}

/// Relative size of `ψ*` at the four branch-point arguments
/// `±1/√(a_1a_2x)`, `±√(q/(a_1a_2x))`, against its size on `|y| = |1/√(a_1a_2x)|`.
pub fn branch_clearance(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<f64> {
    check_r2(spec)?;
    let s = (spec.a_product() * x).sqrt();
    let t = ctx.sqrt_q() / s;
    let mut crit = Vec::with_capacity(4);
    for y in [ONE / s, -ONE / s, t, -t] {
        crit.push(psi_star_extended(spec, x, y, ctx)?.norm());
    }
    let mut scale = crit.iter().copied().fold(0.0, f64::max);
    for k in 0..8 {
        let y = C64::from_polar(1.0 / s.norm(), 0.3 + std::f64::consts::TAU * k as f64 / 8.0);
        scale = scale.max(psi_star_extended(spec, x, y, ctx)?.norm());
    }
    Ok(crit.into_iter().fold(f64::INFINITY, f64::min) / scale)
}

/// `W*(y) = A θ(y²) θ(y/ρ) θ(qρy)` for `r = 7, 8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WFactorization {
    pub a: C64,
    pub rho: C64,
    /// Class mismatch between the second zero found and `1/(qρ)`.
    pub pair_mismatch: f64,
    /// Worst relative reconstruction error at 20 fresh points.
    pub residual: f64,
}

pub fn fit_w_theta2(wspec: &WSpec, ctx: &QContext) -> Result<WFactorization> {
    if wspec.r() != 8 {
        return Err(QError::Domain(format!("two-zero fit needs r = 8, got {}", wspec.r())));
    }
    let (w, c) = (wspec.clone(), *ctx);
    let g = SampledFunction::new("W*/theta(y^2)", move |y| Ok(w_star(&w, y, &c)? / theta(y * y, &c)?));
    let zs = theta_zeros(&g, 2, ctx)?;
    let q = ctx.q();
    let rho = zs.zeros[0];
    let partner = ONE / (q * rho);
    let pair = ctx.nearest_q_power(zs.zeros[1] / partner).1;
    let model = |y: C64| -> Result<C64> { Ok(theta(y * y, ctx)? * theta(y / rho, ctx)? * theta(q * rho * y, ctx)?) };
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED ^ 0x88);
    let avoid = [rho, partner, ONE, ctx.sqrt_q(), -ctx.sqrt_q(), -ONE];
    // keep probes where the bilateral sum does not cancel badly
    let mut probes = Vec::with_capacity(23);
    for y in draw_probes(&mut rng, &avoid, 80, ctx)? {
        let v = w_star_sum(wspec, y, ctx)?;
        if v.scale <= PROBE_CONDITION * v.value.norm() {
            probes.push(y);
        }
        if probes.len() == 23 {
            break;
        }
    }
    if probes.len() < 23 {
        return Err(QError::ProbeDegenerate(format!(
            "only {} well-conditioned probes for the W fit",
            probes.len()
        )));
    }
    let a = w_star(wspec, probes[0], ctx)? / model(probes[0])?;
    let mut residual = 0.0f64;
    for &y in &probes[3..] {
        let want = w_star(wspec, y, ctx)?;
        residual = residual.max(rel(a * model(y)?, want));
    }
    Ok(WFactorization {
        a,
        rho,
        pair_mismatch: pair,
        residual,
    })
}
