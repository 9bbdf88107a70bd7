//! q-Wronskians of `ψ*` solutions and the linear relation in `x`.

use crate::error::{QError, Result};
use crate::linalg::det;
use crate::qcore::{qpoch, qpoch_inf, theta, QContext, C64, ONE, ZERO};
use crate::series::{psi_star, psi_star_extended, SeriesSpec};
use crate::thetaspaces::{delta_n, SampledFunction};

/// Coefficients `λ_0, ..., λ_r` of `x Π(1 - a_j y) - Π(1 - b_j y/q)` in powers of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaCoeffs {
    pub x: C64,
    pub lambdas: Vec<C64>,
}

fn poly_from_roots_scaled(cs: &[C64]) -> Vec<C64> {
    // Π (1 - c_j y), lowest degree first
    let mut p = vec![ONE];
    for &c in cs {
        let mut next = vec![ZERO; p.len() + 1];
        for (i, &v) in p.iter().enumerate() {
            next[i] += v;
            next[i + 1] -= v * c;
        }
        p = next;
    }
    p
}

pub fn lambda_coeffs(spec: &SeriesSpec, x: C64, ctx: &QContext) -> LambdaCoeffs {
    let q = ctx.q();
    let pa = poly_from_roots_scaled(spec.a());
    let bq: Vec<C64> = spec.b().iter().map(|&b| b / q).collect();
    let pb = poly_from_roots_scaled(&bq);
    LambdaCoeffs {
        x,
        lambdas: pa.iter().zip(&pb).map(|(&u, &v)| x * u - v).collect(),
    }
}

fn check_r2(spec: &SeriesSpec) -> Result<()> {
    if spec.r() != 2 {
        return Err(QError::Domain(format!("expected a 2psi2 spec, got r = {}", spec.r())));
    }
    Ok(())
}

/// Coefficient `y^j λ_j(x) (x)_j / (B/(x q^j))_j` of `ψ*(x q^j, y)` in the
/// linear relation, `j = 0..=r`.
pub fn linear_relation_coeffs(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<Vec<C64>> {
    let lambdas = lambda_coeffs(spec, x, ctx).lambdas;
    let bal = spec.balance();
    let mut out = Vec::with_capacity(spec.r() + 1);
    let mut yj = ONE;
    for (j, &l) in lambdas.iter().enumerate() {
        let j = j as i64;
        let den = qpoch(bal * ctx.qpow(-j) / x, j, ctx)?;
        if den.norm() < 1e-300 {
            return Err(QError::DivisionByZero(format!("(B/(x q^{j}))_{j} at x = {x}")));
        }
        out.push(yj * l * qpoch(x, j, ctx)? / den);
        yj *= y;
    }
    Ok(out)
}

fn normalized_sum(terms: &[C64]) -> f64 {
    let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let s: C64 = terms.iter().sum();
    if scale == 0.0 {
        0.0
    } else {
        s.norm() / scale
    }
}

/// Residual of the `r+1`-term relation in `x`, normalized by the largest term.
pub fn psi_star_linear_relation_residual(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<f64> {
    let coeffs = linear_relation_coeffs(spec, x, y, ctx)?;
    let mut terms = Vec::with_capacity(coeffs.len());
    for (j, c) in coeffs.into_iter().enumerate() {
        terms.push(c * psi_star(spec, x * ctx.qpow(j as i64), y, ctx)?);
    }
    Ok(normalized_sum(&terms))
}

/// Residual of the three-term equation in `x` for a `_2ψ_2` spec.
pub fn three_term_residual(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<f64> {
    check_r2(spec)?;
    let q = ctx.q();
    let (a, b) = (spec.a(), spec.b());
    let aa = a[0] * a[1];
    let terms = [
        (ONE - b[0] * b[1] / (aa * q * x)) * psi_star(spec, x, y, ctx)?,
        y * ((a[0] + a[1]) * x - (b[0] + b[1]) / q) * psi_star(spec, q * x, y, ctx)?,
        -aa * x * y * y * (ONE - q * x) * psi_star(spec, q * q * x, y, ctx)?,
    ];
    Ok(normalized_sum(&terms))
}

/// `(b_i/a_j)_∞` over all pairs `i, j`.
pub fn ratio_pochhammer(spec: &SeriesSpec, ctx: &QContext) -> Result<C64> {
    let mut p = ONE;
    for &b in spec.b() {
        for &a in spec.a() {
            p *= qpoch_inf(b / a, ctx)?;
        }
    }
    Ok(p)
}

/// `W(x,y,z) = θ(qx/y)ψ*(qx,y)·θ(x/z)ψ*(x,z) − θ(x/y)ψ*(x,y)·θ(qx/z)ψ*(qx,z)`.
pub fn wronskian2(spec: &SeriesSpec, x: C64, y: C64, z: C64, ctx: &QContext) -> Result<C64> {
    check_r2(spec)?;
    let qx = ctx.q() * x;
    let f = |u: C64, v: C64| -> Result<C64> { Ok(theta(u / v, ctx)? * psi_star_extended(spec, u, v, ctx)?) };
    Ok(f(qx, y)? * f(x, z)? - f(x, y)? * f(qx, z)?)
}

/// The second printed form, `(1/x) θ(x/y)θ(x/z)` times the bracket.
pub fn wronskian2_bracket_form(spec: &SeriesSpec, x: C64, y: C64, z: C64, ctx: &QContext) -> Result<C64> {
    check_r2(spec)?;
    Ok(theta(x / y, ctx)? * theta(x / z, ctx)? * bracket(spec, x, y, z, ctx)? / x)
}

/// `z ψ*(x,y)ψ*(qx,z) − y ψ*(qx,y)ψ*(x,z)`.
pub fn bracket(spec: &SeriesSpec, x: C64, y: C64, z: C64, ctx: &QContext) -> Result<C64> {
    let qx = ctx.q() * x;
    let p = |u: C64, v: C64| psi_star_extended(spec, u, v, ctx);
    Ok(z * p(x, y)? * p(qx, z)? - y * p(qx, y)? * p(x, z)?)
}

/// `(b_i/a_j, qx, B/x)_∞`, the common factor of the closed forms.
fn closed_prefactor(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<C64> {
    Ok(ratio_pochhammer(spec, ctx)? * qpoch_inf(ctx.q() * x, ctx)? * qpoch_inf(spec.balance() / x, ctx)?)
}

/// `z (b_i/a_j, qx, B/x)_∞ θ(y/z) θ(a_1a_2xyz)`, the closed form of the bracket.
pub fn bracket_closed_form(spec: &SeriesSpec, x: C64, y: C64, z: C64, ctx: &QContext) -> Result<C64> {
    check_r2(spec)?;
    let aa = spec.a_product();
    Ok(z * closed_prefactor(spec, x, ctx)? * theta(y / z, ctx)? * theta(aa * x * y * z, ctx)?)
}

/// `(z/x)(b_i/a_j, qx, B/x)_∞ θ(y/z)θ(x/y)θ(x/z)θ(a_1a_2xyz)`.
pub fn wronskian2_closed_form(spec: &SeriesSpec, x: C64, y: C64, z: C64, ctx: &QContext) -> Result<C64> {
    Ok(bracket_closed_form(spec, x, y, z, ctx)? * theta(x / y, ctx)? * theta(x / z, ctx)? / x)
}

/// `W(x, y, z) / ((z/x)(qx, B/x)_∞ θ(y/z)θ(x/y)θ(x/z)θ(a_1a_2xyz))`; the
/// closed form predicts the `x`-free constant `(b_i/a_j)_∞`.
pub fn wronskian2_constant(spec: &SeriesSpec, x: C64, y: C64, z: C64, ctx: &QContext) -> Result<C64> {
    let w = wronskian2(spec, x, y, z, ctx)?;
    let closed = wronskian2_closed_form(spec, x, y, z, ctx)?;
    Ok(w / closed * ratio_pochhammer(spec, ctx)?)
}

/// Theta-form identity from substituting `ψ* = A θ(y/ρ)θ(a_1a_2xyρ)` into the
/// bracket, with `A` divided out:
/// `z θ(y/ρ)θ(cyρ)θ(z/ρ')θ(qczρ') − y θ(y/ρ')θ(qcyρ')θ(z/ρ)θ(czρ)`
/// against `−z/(cρρ') θ(ρ/ρ')θ(cρρ')θ(y/z)θ(cyz)`, with `c = a_1a_2x`,
/// `ρ = ρ(x)`, `ρ' = ρ(qx)`. Returns the relative residual.
pub fn weierstrass_residual(
    spec: &SeriesSpec,
    x: C64,
    rho: C64,
    rho_q: C64,
    y: C64,
    z: C64,
    ctx: &QContext,
) -> Result<f64> {
    check_r2(spec)?;
    let c = spec.a_product() * x;
    let q = ctx.q();
    let t = |v: C64| theta(v, ctx);
    let lhs = z * t(y / rho)? * t(c * y * rho)? * t(z / rho_q)? * t(q * c * z * rho_q)?
        - y * t(y / rho_q)? * t(q * c * y * rho_q)? * t(z / rho)? * t(c * z * rho)?;
    let rhs = -z / (c * rho * rho_q) * t(rho / rho_q)? * t(c * rho * rho_q)? * t(y / z)? * t(c * y * z)?;
    Ok((lhs - rhs).norm() / (rhs.norm() + lhs.norm() + ctx.eps()))
}

/// The function of `y` from setting `z = y√q` in the bracket:
/// `ψ*(x,y)ψ*(qx,y√q) + θ(√q)/(2√q)·(qx, B/x, b_i/a_j)_∞ θ(a_1a_2xy²√q)`.
pub fn half_period_function(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<C64> {
    check_r2(spec)?;
    let sq = ctx.sqrt_q();
    let p = psi_star_extended(spec, x, y, ctx)? * psi_star_extended(spec, ctx.q() * x, y * sq, ctx)?;
    let k = theta(sq, ctx)? / (2.0 * sq) * closed_prefactor(spec, x, ctx)?;
    Ok(p + k * theta(spec.a_product() * x * y * y * sq, ctx)?)
}

/// Relative defect of `f(y√q) = f(y)/(a_1a_2xy²√q)` for `half_period_function`.
pub fn half_period_residual(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<f64> {
    let sq = ctx.sqrt_q();
    let m = spec.a_product() * x * y * y * sq;
    let f = half_period_function(spec, x, y, ctx)?;
    let g = half_period_function(spec, x, y * sq, ctx)? * m;
    Ok((g - f).norm() / (f.norm() + g.norm() + ctx.eps()))
}

/// Ratio `det(y_i^{j-1} ψ*(q^{j-1}x, y_i)) / (Δ_r(y) θ(a_1y_1⋯a_ry_r x) Π_{j=1}^{r-1}(xq^j, B/(xq^{j-1}))_∞)`.
///
/// Supported and tested for `r <= 3`; larger `r` works when `x q^{r-1}` is
/// still inside the annulus.
pub fn gustafson_ratio(spec: &SeriesSpec, x: C64, ys: &[C64], ctx: &QContext) -> Result<C64> {
    let r = spec.r();
    if ys.len() != r {
        return Err(QError::Domain(format!("need {r} nodes, got {}", ys.len())));
    }
    let mut rows = Vec::with_capacity(r);
    for &y in ys {
        let mut row = Vec::with_capacity(r);
        let mut yp = ONE;
        for j in 0..r {
            row.push(yp * psi_star_extended(spec, x * ctx.qpow(j as i64), y, ctx)?);
            yp *= y;
        }
        rows.push(row);
    }
    let num = det(&rows);
    let ay: C64 = spec.a().iter().zip(ys).map(|(&a, &y)| a * y).product();
    let mut den = delta_n(ys, ctx)? * theta(ay * x, ctx)?;
    let bal = spec.balance();
    for j in 1..r as i64 {
        den *= qpoch_inf(x * ctx.qpow(j), ctx)? * qpoch_inf(bal / (x * ctx.qpow(j - 1)), ctx)?;
    }
    if den.norm() < 1e-12 * num.norm().max(1e-300) || den == ZERO {
        return Err(QError::DegenerateNodes(format!(
            "ratio denominator {den} at nodes {ys:?}"
        )));
    }
    Ok(num / den)
}

/// `(q)_∞^{-(r-1)(r-2)/2} Π_{i,j}(b_i/a_j)_∞`, the predicted value of `gustafson_ratio`.
pub fn gustafson_value(spec: &SeriesSpec, ctx: &QContext) -> Result<C64> {
    let r = spec.r() as i32;
    Ok(ratio_pochhammer(spec, ctx)? * ctx.q_inf().powi(-(r - 1) * (r - 2) / 2))
}

/// Checks `W(qx) c_n(x) = (-1)^n c_0(x) W(x)` for the `q`-Wronskian of `fs`.
///
/// Each `f` must first satisfy `Σ_m c_m(x) f(xq^m) = 0` to `1e-9`; otherwise
/// `GuardFailed` is returned before the Wronskian is formed.
pub fn qwronskian_step_check(fs: &[SampledFunction], cs: &[SampledFunction], x: C64, ctx: &QContext) -> Result<f64> {
    const GUARD: f64 = 1e-9;
    let n = fs.len();
    if cs.len() != n + 1 {
        return Err(QError::Domain(format!("need {} coefficients, got {}", n + 1, cs.len())));
    }
    let coeffs = cs.iter().map(|c| c.eval(x)).collect::<Result<Vec<_>>>()?;
    // values[i][m] = f_i(x q^m), m = 0..=n
    let values = fs
        .iter()
        .map(|f| {
            (0..=n)
                .map(|m| f.eval(x * ctx.qpow(m as i64)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    for row in &values {
        let terms: Vec<C64> = row.iter().zip(&coeffs).map(|(&v, &c)| v * c).collect();
        let residual = normalized_sum(&terms);
        if !(residual < GUARD) {
            return Err(QError::GuardFailed { residual });
        }
    }
    let w_x = det(&values.iter().map(|r| r[..n].to_vec()).collect::<Vec<_>>());
    let w_qx = det(&values.iter().map(|r| r[1..].to_vec()).collect::<Vec<_>>());
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let lhs = w_qx * coeffs[n];
    let rhs = coeffs[0] * w_x * sign;
    Ok((lhs - rhs).norm() / (lhs.norm() + rhs.norm() + ctx.eps()))
}

/// Solutions `θ(x/y_k)ψ*(x,y_k)` and the coefficients
/// `(-1)^j q^{j(j-1)/2} x^j λ_j(x)(x)_j/(B/(xq^j))_j` of the equation they solve.
pub fn theta_solution_system(
    spec: &SeriesSpec,
    ys: &[C64],
    ctx: QContext,
) -> (Vec<SampledFunction>, Vec<SampledFunction>) {
    let fs = ys
        .iter()
        .map(|&y| {
            let s = spec.clone();
            SampledFunction::new(format!("theta(x/{y}) psi*(x, {y})"), move |x| {
                Ok(theta(x / y, &ctx)? * psi_star_extended(&s, x, y, &ctx)?)
            })
        })
        .collect();
    let cs = (0..=spec.r())
        .map(|j| {
            let s = spec.clone();
            SampledFunction::new(format!("c_{j}"), move |x| {
                let base = linear_relation_coeffs(&s, x, ONE, &ctx)?[j];
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let jj = j as i64;
                Ok(base * ctx.qpow(jj * (jj - 1) / 2) * x.powi(j as i32) * sign)
            })
        })
        .collect();
    (fs, cs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }
    fn r(v: f64) -> C64 {
        C64::new(v, 0.0)
    }
    fn ctx() -> QContext {
        QContext::real(0.5).unwrap()
    }
    fn spec2() -> SeriesSpec {
        SeriesSpec::from_real(&[2.0, 3.0], &[0.1, 0.15]).unwrap()
    }
    fn spec3() -> SeriesSpec {
        SeriesSpec::from_real(&[2.0, 3.0, 1.5], &[0.1, 0.15, 0.2]).unwrap()
    }

    #[test]
    fn lambda_examples() {
        let ctx = ctx();
        let x = c(0.3, 0.2);
        let s1 = SeriesSpec::from_real(&[2.0], &[0.3]).unwrap();
        let l = lambda_coeffs(&s1, x, &ctx).lambdas;
        assert!((l[0] - (x - ONE)).norm() < 1e-15);
        assert!((l[1] - (-r(2.0) * x + r(0.3) / ctx.q())).norm() < 1e-15);

        let s = spec3();
        let l = lambda_coeffs(&s, x, &ctx).lambdas;
        for y in [r(0.7), c(-1.2, 0.4), c(0.1, 2.0), r(3.0), c(0.0, -0.5)] {
            let poly: C64 = l.iter().enumerate().map(|(j, &v)| v * y.powi(j as i32)).sum();
            let direct = x * s.a().iter().map(|&a| ONE - a * y).product::<C64>()
                - s.b().iter().map(|&b| ONE - b * y / ctx.q()).product::<C64>();
            assert!((poly - direct).norm() < 1e-12 * direct.norm().max(1.0));
        }
        let lr = x * (-s.a_product()) + s.b_product() / ctx.q().powi(3);
        assert!((l[3] - lr).norm() < 1e-12 * lr.norm());
    }

    #[test]
    fn linear_relation_examples() {
        let ctx = ctx();
        let s1 = SeriesSpec::from_real(&[2.0], &[0.3]).unwrap();
        assert!(psi_star_linear_relation_residual(&s1, r(0.6), c(0.8, 0.3), &ctx).unwrap() < 1e-10);
        let s2 = spec2();
        assert!(psi_star_linear_relation_residual(&s2, r(0.4), r(0.9), &ctx).unwrap() < 1e-9);
        assert!(three_term_residual(&s2, r(0.4), r(0.9), &ctx).unwrap() < 1e-9);
        assert!(three_term_residual(&s2, c(0.5, 0.3), c(-0.7, 1.1), &ctx).unwrap() < 1e-9);
        assert!(psi_star_linear_relation_residual(&spec3(), r(0.3), r(0.9), &ctx).unwrap() < 1e-8);
    }

    #[test]
    fn wronskian2_examples() {
        let ctx = ctx();
        let s = spec2();
        let (x, y, z) = (c(0.4, 0.1), c(0.9, -0.2), c(-0.6, 0.7));
        assert_eq!(wronskian2(&s, x, y, y, &ctx).unwrap(), ZERO);
        let w = wronskian2(&s, x, y, z, &ctx).unwrap();
        let closed = wronskian2_closed_form(&s, x, y, z, &ctx).unwrap();
        assert!((w - closed).norm() < 1e-9 * closed.norm(), "{w} vs {closed}");
        let swapped = wronskian2(&s, x, z, y, &ctx).unwrap();
        assert!((w + swapped).norm() < 1e-10 * w.norm());
        let printed = wronskian2_bracket_form(&s, x, y, z, &ctx).unwrap();
        assert!((w - printed).norm() < 1e-10 * w.norm());
        let b = bracket(&s, x, y, z, &ctx).unwrap();
        let bc = bracket_closed_form(&s, x, y, z, &ctx).unwrap();
        assert!((b - bc).norm() < 1e-9 * bc.norm());
    }

    #[test]
    fn wronskian2_constant_at_b_nodes() {
        let ctx = ctx();
        let s = spec2();
        let q = ctx.q();
        let (y, z) = (q / s.b()[0], q / s.b()[1]);
        let want = ratio_pochhammer(&s, &ctx).unwrap();
        for x in [r(0.3), c(0.5, 0.2)] {
            let got = wronskian2_constant(&s, x, y, z, &ctx).unwrap();
            assert!((got - want).norm() < 1e-9 * want.norm(), "{got} vs {want}");
        }
    }

    #[test]
    fn half_period_examples() {
        let ctx = ctx();
        let s = spec2();
        for y in [r(0.9), c(0.6, 0.8), c(-1.3, 0.2)] {
            assert!(half_period_residual(&s, r(0.4), y, &ctx).unwrap() < 1e-8);
        }
    }

    #[test]
    fn gustafson_examples() {
        let ctx = ctx();
        for s in [spec2(), spec3()] {
            let want = gustafson_value(&s, &ctx).unwrap();
            let nodes: [Vec<C64>; 2] = [
                vec![r(0.7), c(1.1, 0.3), c(-0.8, 0.5)],
                vec![c(0.9, -0.4), r(1.3), c(0.2, 0.8)],
            ];
            for x in [r(0.3), c(0.2, 0.1)] {
                for ys in &nodes {
                    let got = gustafson_ratio(&s, x, &ys[..s.r()], &ctx).unwrap();
                    assert!((got - want).norm() < 1e-8 * want.norm(), "r={} {got} vs {want}", s.r());
                }
            }
        }
    }

    #[test]
    fn step_check_examples() {
        let ctx = ctx();
        let x = c(0.3, 0.1);
        let ys = [r(0.9), c(-0.6, 0.7), c(1.2, 0.4)];
        let (fs, cs) = theta_solution_system(&spec2(), &ys[..2], ctx);
        assert!(qwronskian_step_check(&fs[..1], &cs[..2], x, &ctx).is_err()); // c_2 term missing
        assert!(qwronskian_step_check(&fs, &cs, x, &ctx).unwrap() < 1e-9);

        let s1 = SeriesSpec::from_real(&[2.0], &[0.3]).unwrap();
        let (fs, cs) = theta_solution_system(&s1, &ys[..1], ctx);
        assert!(qwronskian_step_check(&fs, &cs, r(0.6), &ctx).unwrap() < 1e-10);

        let (fs, cs) = theta_solution_system(&spec3(), &ys, ctx);
        assert!(qwronskian_step_check(&fs, &cs, r(0.2), &ctx).unwrap() < 1e-8);

        let bogus = SampledFunction::new("x", Ok);
        let (_, cs) = theta_solution_system(&spec2(), &ys[..2], ctx);
        assert!(matches!(
            qwronskian_step_check(&[bogus.clone(), bogus], &cs, x, &ctx),
            Err(QError::GuardFailed { .. })
        ));
    }

    #[test]
    fn weierstrass_form_is_a_theta_identity() {
        let ctx = ctx();
        let s = spec2();
        let res = weierstrass_residual(&s, r(0.4), c(0.7, 0.2), c(-1.1, 0.5), r(0.9), c(0.3, 1.2), &ctx).unwrap();
        assert!(res < 1e-12, "{res}");
    }
}
