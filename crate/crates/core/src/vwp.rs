//! Closed forms and symmetry checks for the VWP-balanced numerators `W*`.

use crate::error::{QError, Result};
use crate::qcore::{qpoch_inf_multi, theta, QContext, C64};
use crate::series::{w_star, w_star_sum, WSpec};

fn rel(a: C64, b: C64) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

fn pair_products(q: C64, a: &[C64]) -> Vec<C64> {
    let mut out = Vec::new();
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            out.push(q / (a[i] * a[j]));
        }
    }
    out
}

fn expect_r(wspec: &WSpec, r: usize) -> Result<()> {
    if wspec.r() != r {
        return Err(QError::Domain(format!("expected r = {r}, got r = {}", wspec.r())));
    }
    Ok(())
}

/// `_6W_6*(y) = (q/a_ia_j, i<j)_∞ θ(y²)`.
pub fn w6_closed_form(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<C64> {
    expect_r(wspec, 6)?;
    Ok(qpoch_inf_multi(&pair_products(ctx.q(), wspec.a()), ctx)? * theta(y * y, ctx)?)
}

/// `_5W_5*(y)` from the `√q` specialization of the `_6W_6` product.
pub fn w5_closed_form(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<C64> {
    expect_r(wspec, 5)?;
    let sq = ctx.sqrt_q();
    let mut args: Vec<C64> = wspec.a().iter().map(|&a| sq / a).collect();
    args.extend(pair_products(ctx.q(), wspec.a()));
    let qi = ctx.q_inf();
    Ok(qpoch_inf_multi(&args, ctx)? / (qi * qi) * theta(y, ctx)? * theta(-y, ctx)? * theta(-y * sq, ctx)?)
}

/// `|W*(y)| / scale` for `r = 3, 4`, where `W*` vanishes identically.
pub fn w_vanishing_residual(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<f64> {
    if !matches!(wspec.r(), 3 | 4) {
        return Err(QError::Domain(format!(
            "W* vanishes only for r = 3, 4, got {}",
            wspec.r()
        )));
    }
    let s = w_star_sum(wspec, y, ctx)?;
    Ok(s.value.norm() / s.scale)
}

/// `W*(1/y) = −W*(y)/y²`.
pub fn w_reflection_residual(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<f64> {
    Ok(rel(w_star(wspec, y.inv(), ctx)?, -w_star(wspec, y, ctx)? / (y * y)))
}

/// `W*(qy) q^{(r-4)/2} y^{r-2} = (−1)^r W*(y)`.
pub fn w_quasi_periodic_residual(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<f64> {
    let r = wspec.r() as i32;
    let lhs = w_star(wspec, ctx.q() * y, ctx)? * ctx.sqrt_q().powi(r - 4) * y.powi(r - 2);
    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
    Ok(rel(lhs, sign * w_star(wspec, y, ctx)?))
}

/// Setting the last parameter to `√q` drops `r` by one:
/// `W*_r(y) = θ(y√q)/(q)_∞ · W*_{r-1}(y)`.
pub fn sqrt_q_reduction_residual(lower: &WSpec, y: C64, ctx: &QContext) -> Result<f64> {
    let mut a = lower.a().to_vec();
    a.push(ctx.sqrt_q());
    let upper = WSpec::new(a)?;
    let lhs = w_star(&upper, y, ctx)?;
    let rhs = theta(y * ctx.sqrt_q(), ctx)? / ctx.q_inf() * w_star(lower, y, ctx)?;
    Ok(rel(lhs, rhs))
}

pub fn w6_residual(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<f64> {
    Ok(rel(w_star(wspec, y, ctx)?, w6_closed_form(wspec, y, ctx)?))
}

pub fn w5_residual(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<f64> {
    Ok(rel(w_star(wspec, y, ctx)?, w5_closed_form(wspec, y, ctx)?))
}

/// Spread of `W*_6(y)/θ(y²)` over the given points, relative to its mean modulus.
pub fn w6_constancy(wspec: &WSpec, ys: &[C64], ctx: &QContext) -> Result<f64> {
    expect_r(wspec, 6)?;
    let vals = ys
        .iter()
        .map(|&y| Ok(w_star(wspec, y, ctx)? / theta(y * y, ctx)?))
        .collect::<Result<Vec<C64>>>()?;
    let first = vals[0];
    Ok(vals.iter().map(|&v| rel(v, first)).fold(0.0, f64::max))
}

/// `(q/a_ia_j)_∞` product appearing in the six-parameter closed form.
pub fn w6_constant(wspec: &WSpec, ctx: &QContext) -> Result<C64> {
    expect_r(wspec, 6)?;
    qpoch_inf_multi(&pair_products(ctx.q(), wspec.a()), ctx)
}
