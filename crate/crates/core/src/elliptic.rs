//! The theta quotient `θ(x)²/θ(-x)²` and its Jacobi inversion integral.
//!
//! With `u = s²` the inversion integral becomes
//! `∫ 2 ds / √((1 - k1 s²)(1 - k2 s²))`, which is regular at `s = 0`.
//! Its four branch points `±1/√k1`, `±1/√k2` are kept off the path: a
//! straight segment from `0` to `√y` is used when it clears them, and a
//! polyline detour otherwise. Every branch of the integral yields a valid
//! solution of the quotient equation, so a detour changes only which member
//! of `{qⁿx, qⁿ/x}` is returned.

use crate::error::{QError, Result};
use crate::qcore::{theta, QContext, C64, ONE, ZERO};
use crate::quad::integrate_unit;

/// `k1 = θ(√q)²/θ(-√q)²`, `k2 = 1/k1` and `norm = θ(√q)θ(-√q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConstants {
    pub k1: C64,
    pub k2: C64,
    pub norm: C64,
}

impl InversionConstants {
    pub fn new(ctx: &QContext) -> Result<Self> {
        let s = ctx.sqrt_q();
        let tp = theta(s, ctx)?;
        let tm = theta(-s, ctx)?;
        Ok(InversionConstants {
            k1: tp * tp / (tm * tm),
            k2: tm * tm / (tp * tp),
            norm: tp * tm,
        })
    }

    /// Branch points of the integrand in `u`, excluding `0` and `∞`.
    pub fn branch_points_u(&self) -> [C64; 2] {
        [ONE / self.k1, ONE / self.k2]
    }

    /// The four branch points in the `s = √u` plane.
    fn branch_points_s(&self) -> [C64; 4] {
        let a = ONE / self.k1.sqrt();
        let b = ONE / self.k2.sqrt();
        [a, -a, b, -b]
    }
}

/// Relative distance in `u` below which an endpoint counts as a branch point.
pub const BRANCH_CLEARANCE: f64 = 1e-3;

/// `θ(x)² / θ(-x)²`.
pub fn theta_quotient(x: C64, ctx: &QContext) -> Result<C64> {
    if x == ZERO {
        return Err(QError::Domain("theta quotient needs x != 0".into()));
    }
    let tm = theta(-x, ctx)?;
    if tm.norm() < 1e-10 {
        return Err(QError::PoleHit(format!("θ(-x) = {tm} at x = {x}")));
    }
    let tp = theta(x, ctx)?;
    Ok(tp * tp / (tm * tm))
}

/// Principal value of `1/√(u(1 - k1 u)(1 - k2 u))`.
pub fn inversion_kernel(u: C64, consts: &InversionConstants) -> Result<C64> {
    let f1 = ONE - consts.k1 * u;
    let f2 = ONE - consts.k2 * u;
    let tiny = 1e-300;
    if u.norm() < tiny || f1.norm() < 1e-15 || f2.norm() < 1e-15 {
        return Err(QError::BranchPointHit(format!("{u}")));
    }
    Ok(ONE / (u * (f1 * f2)).sqrt())
}

/// The factor `√(1 - s/τ)` continued along one path segment.
///
/// The cut is rotated to point away from the segment midpoint, so the value is
/// analytic along the whole segment; the overall sign is fixed by the caller.
#[derive(Clone, Copy)]
struct SegmentRoot {
    tau: C64,
    rot: C64,
    rot_sqrt: C64,
    sign: f64,
}

impl SegmentRoot {
    fn new(tau: C64, mid: C64) -> Self {
        let m = ONE - mid / tau;
        let rot = if m.norm() > 0.0 { m / m.norm() } else { ONE };
        SegmentRoot {
            tau,
            rot,
            rot_sqrt: rot.sqrt(),
            sign: 1.0,
        }
    }

    fn eval(&self, s: C64) -> C64 {
        self.rot_sqrt * ((ONE - s / self.tau) / self.rot).sqrt() * self.sign
    }
}

fn dist_to_segment(p: C64, a: C64, b: C64) -> (f64, C64) {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return ((p - a).norm(), a);
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    let foot = a + d * t;
    ((p - foot).norm(), foot)
}

/// A path in the `s` plane from `0` to `target` that passes no branch point
/// closer than half its distance to the nearer segment end.
///
/// Near misses are left to the adaptive quadrature; only segments that would
/// run through (or graze) a branch point get a waypoint beside it.
fn build_path(target: C64, branch: &[C64; 4]) -> Result<Vec<C64>> {
    const MAX_POINTS: usize = 64;
    let mut path = vec![ZERO, target];
    let mut i = 0;
    while i + 1 < path.len() {
        let (a, b) = (path[i], path[i + 1]);
        let hit = branch.iter().find_map(|&sig| {
            let (d, foot) = dist_to_segment(sig, a, b);
            let ends = (sig - a).norm().min((sig - b).norm());
            (d < 0.5 * ends).then_some((sig, foot, ends))
        });
        match hit {
            Some((sig, foot, ends)) => {
                if path.len() >= MAX_POINTS {
                    return Err(QError::NearBranchPoint(format!(
                        "no clear integration path to s = {target}"
                    )));
                }
                let dir = (b - a) / (b - a).norm();
                let mut normal = dir * C64::new(0.0, 1.0);
                // step to the side of the segment away from the branch point
                if ((sig - foot) * normal.conj()).re > 0.0 {
                    normal = -normal;
                }
                let h = ends.min(0.5 * sig.norm());
                path.insert(i + 1, sig + normal * h);
            }
            None => i += 1,
        }
    }
    Ok(path)
}

/// `∫_0^y du/√(u(1-k1 u)(1-k2 u))` on the branch reached along the chosen path.
pub fn inversion_integral(y: C64, consts: &InversionConstants) -> Result<C64> {
    for bp in consts.branch_points_u() {
        if (y - bp).norm() < BRANCH_CLEARANCE * bp.norm() {
            return Err(QError::NearBranchPoint(format!(
                "upper limit {y} lies within relative {BRANCH_CLEARANCE} of {bp}"
            )));
        }
    }
    let small = consts.k1.norm().min(consts.k2.norm());
    if y.norm() < BRANCH_CLEARANCE * small {
        return Err(QError::NearBranchPoint(format!("upper limit {y} lies too close to 0")));
    }
    let target = y.sqrt();
    let branch = consts.branch_points_s();
    let path = build_path(target, &branch)?;
    let mut total = ZERO;
    // continued values of the four root factors at the current path point
    let mut current = [ONE; 4];
    for seg in path.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mid = 0.5 * (a + b);
        let mut roots = branch.map(|t| SegmentRoot::new(t, mid));
        for (root, cur) in roots.iter_mut().zip(current.iter()) {
            if (root.eval(a) + cur).norm() < (root.eval(a) - cur).norm() {
                root.sign = -1.0;
            }
        }
        let d = b - a;
        let piece = integrate_unit(
            |t| {
                let s = a + d * t;
                let den: C64 = roots.iter().map(|r| r.eval(s)).product();
                Ok(C64::new(2.0, 0.0) * d / den)
            },
            1e-11,
        )?;
        total += piece;
        for (root, cur) in roots.iter().zip(current.iter_mut()) {
            *cur = root.eval(b);
        }
    }
    Ok(total)
}

/// A solution `x` of `θ(x)²/θ(-x)² = y`.
pub fn jacobi_inverse(y: C64, ctx: &QContext) -> Result<C64> {
    let consts = InversionConstants::new(ctx)?;
    jacobi_inverse_with(y, &consts)
}

pub fn jacobi_inverse_with(y: C64, consts: &InversionConstants) -> Result<C64> {
    Ok((inversion_integral(y, consts)? / consts.norm).exp())
}

/// True when `x` and `x0` represent the same solution of the quotient
/// equation, i.e. `x ∈ q^ℤ x0 ∪ q^ℤ / x0`, to relative tolerance `tol`.
pub fn same_solution_class(x: C64, x0: C64, tol: f64, ctx: &QContext) -> bool {
    ctx.same_q_class(x, x0, tol) || ctx.same_q_class(x * x0, ONE, tol)
}
