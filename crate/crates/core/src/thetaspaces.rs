//! The spaces `Θ_n(c)` and `Ω_{2n}(c)` as numerically testable objects.
//!
//! `Θ_n(c)` holds the functions analytic on the punctured plane with
//! `f(qx) = (-1)^n f(x) / (c x^n)`. Membership, interpolation bases,
//! determinant identities and dimension claims are all checked by sampling.

use std::fmt;
use std::sync::Arc;

use crate::error::{QError, Result};
use crate::linalg::{conditioning_ratio, det};
use crate::qcore::{theta, QContext, C64, ONE, ZERO};
use crate::series::{psi_star, w_star, SeriesSpec, WSpec};

/// Degree `n` and multiplier `c` of a space `Θ_n(c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSpaceTag {
    pub n: i32,
    pub c: C64,
}

impl ThetaSpaceTag {
    pub fn new(n: i32, c: C64) -> Result<Self> {
        if c == ZERO {
            return Err(QError::Domain("theta space multiplier must be non-zero".into()));
        }
        Ok(ThetaSpaceTag { n, c })
    }
}

type EvalFn = dyn Fn(C64) -> Result<C64> + Send + Sync;

/// A labelled callable `C∖{0} → C`. The closure must be reentrant.
#[derive(Clone)]
pub struct SampledFunction {
    eval: Arc<EvalFn>,
    pub label: String,
}

impl SampledFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(C64) -> Result<C64> + Send + Sync + 'static) -> Self {
        SampledFunction {
            eval: Arc::new(f),
            label: label.into(),
        }
    }

    pub fn eval(&self, x: C64) -> Result<C64> {
        (self.eval)(x)
    }

    /// `x ↦ Π_i θ(α_i x)`, a member of `Θ_n(α_1⋯α_n)`.
    pub fn theta_product(alphas: Vec<C64>, ctx: QContext) -> Self {
        let label = format!("theta product {alphas:?}");
        SampledFunction::new(label, move |x| {
            alphas.iter().try_fold(ONE, |acc, &a| Ok(acc * theta(a * x, &ctx)?))
        })
    }

    /// `y ↦ ψ*(x, y)`, a member of `Θ_r(a_1⋯a_r x)`.
    pub fn psi_star_in_y(spec: SeriesSpec, x: C64, ctx: QContext) -> Self {
        SampledFunction::new(format!("psi* at x = {x}"), move |y| psi_star(&spec, x, y, &ctx))
    }

    /// `x ↦ f(x) g(x)`.
    pub fn product(&self, other: &SampledFunction) -> Self {
        let (f, g) = (self.clone(), other.clone());
        SampledFunction::new(format!("({}) * ({})", f.label, g.label), move |x| {
            Ok(f.eval(x)? * g.eval(x)?)
        })
    }
}

impl fmt::Debug for SampledFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SampledFunction({})", self.label)
    }
}

/// Largest normalized defect of `f(qx) c x^n = (-1)^n f(x)` over `xs`.
pub fn theta_space_residual(f: &SampledFunction, tag: ThetaSpaceTag, xs: &[C64], ctx: &QContext) -> Result<f64> {
    let sign = if tag.n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut worst = 0.0f64;
    for &x in xs {
        if x == ZERO {
            return Err(QError::Domain("sample point x = 0".into()));
        }
        let fx = f.eval(x)?;
        let fqx = f.eval(ctx.q() * x)?;
        let lhs = fqx * tag.c * x.powi(tag.n);
        let res = (lhs - fx * sign).norm() / (fx.norm() + lhs.norm() + ctx.eps());
        worst = worst.max(res);
    }
    Ok(worst)
}

/// Denominators below this modulus are treated as degenerate nodes.
pub const NODE_TOLERANCE: f64 = 1e-8;

fn guarded_theta(z: C64, what: &str, ctx: &QContext) -> Result<C64> {
    let t = theta(z, ctx)?;
    if t.norm() < NODE_TOLERANCE {
        return Err(QError::DegenerateNodes(format!("{what}: θ({z}) = {t}")));
    }
    Ok(t)
}

/// Cardinal basis `ϑ_j` of `Θ_n(c)` for nodes `zs` (0-based `j`):
/// `θ(c z_1⋯z_n x / z_j)/θ(c z_1⋯z_n) · Π_{k≠j} θ(x/z_k)/θ(z_j/z_k)`.
pub fn vartheta_basis(j: usize, zs: &[C64], c: C64, x: C64, ctx: &QContext) -> Result<C64> {
    if j >= zs.len() {
        return Err(QError::Domain(format!("basis index {j} out of range")));
    }
    let cz: C64 = c * zs.iter().product::<C64>();
    let mut v = theta(cz * x / zs[j], ctx)? / guarded_theta(cz, "c z_1...z_n", ctx)?;
    for (k, &zk) in zs.iter().enumerate() {
        if k != j {
            v *= theta(x / zk, ctx)? / guarded_theta(zs[j] / zk, "z_j/z_k", ctx)?;
        }
    }
    Ok(v)
}

/// Interpolates `f ∈ Θ_n(c)` from its values at the nodes and returns the
/// normalized defect at `x`.
fn expansion_residual(target: C64, values: &[C64], basis: impl Fn(usize) -> Result<C64>) -> Result<f64> {
    let mut sum = ZERO;
    let mut scale = target.norm();
    for (j, &v) in values.iter().enumerate() {
        let t = v * basis(j)?;
        scale = scale.max(t.norm());
        sum += t;
    }
    Ok((target - sum).norm() / scale.max(f64::MIN_POSITIVE))
}

/// Residual of the Slater expansion of `ψ*(x, y)` over the nodes `zs`.
pub fn slater_general_check(spec: &SeriesSpec, x: C64, y: C64, zs: &[C64], ctx: &QContext) -> Result<f64> {
    if zs.len() != spec.r() {
        return Err(QError::Domain(format!(
            "Slater expansion needs r = {} nodes, got {}",
            spec.r(),
            zs.len()
        )));
    }
    let c = spec.a_product() * x;
    let target = psi_star(spec, x, y, ctx)?;
    let values = zs
        .iter()
        .map(|&z| psi_star(spec, x, z, ctx))
        .collect::<Result<Vec<_>>>()?;
    expansion_residual(target, &values, |j| vartheta_basis(j, zs, c, y, ctx))
}

/// Cardinal basis `ω_j` of `Ω_{2n}(c)` for `n + 1` nodes (0-based `j`).
pub fn omega_basis(j: usize, zs: &[C64], c: C64, x: C64, ctx: &QContext) -> Result<C64> {
    if j >= zs.len() {
        return Err(QError::Domain(format!("basis index {j} out of range")));
    }
    let zj = zs[j];
    let mut v = ONE;
    for (k, &zk) in zs.iter().enumerate() {
        if k != j {
            v *= theta(x / zk, ctx)? * theta(c * zk * x, ctx)?
                / (guarded_theta(zj / zk, "z_j/z_k", ctx)? * guarded_theta(c * zj * zk, "c z_j z_k", ctx)?);
        }
    }
    Ok(v)
}

/// Residual of `f(x) = Σ_j f(z_j) ω_j(x)` for `f ∈ Ω_{2n}(c)`, worst over `xs`.
pub fn omega_expansion_residual(f: &SampledFunction, zs: &[C64], c: C64, xs: &[C64], ctx: &QContext) -> Result<f64> {
    let values = zs.iter().map(|&z| f.eval(z)).collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for &x in xs {
        let r = expansion_residual(f.eval(x)?, &values, |j| omega_basis(j, zs, c, x, ctx))?;
        worst = worst.max(r);
    }
    Ok(worst)
}

/// `x ↦ g(x) g(q/(c x))`, which lies in `Ω_{2n}(c)` whenever `g ∈ Θ_n(c')`.
pub fn reflected_product(g: &SampledFunction, c: C64, ctx: QContext) -> SampledFunction {
    let g = g.clone();
    SampledFunction::new(format!("{} times its reflection", g.label), move |x| {
        Ok(g.eval(x)? * g.eval(ctx.q() / (c * x))?)
    })
}

/// Worst relative defect of `f(x) = sign · f(q/(c x))` over `xs`.
pub fn reflection_residual(f: &SampledFunction, c: C64, sign: f64, xs: &[C64], ctx: &QContext) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in xs {
        let a = f.eval(x)?;
        let b = f.eval(ctx.q() / (c * x))?;
        let res = (a - b * sign).norm() / (a.norm() + b.norm() + ctx.eps());
        worst = worst.max(res);
    }
    Ok(worst)
}

/// `x ↦ x θ(c x²) g(x)`; odd under `x ↦ q/(c x)` when `g ∈ Ω_{2n-4}(c)`.
pub fn odd_omega_lift(g: &SampledFunction, c: C64, ctx: QContext) -> SampledFunction {
    let g = g.clone();
    SampledFunction::new(format!("x theta(c x^2) ({})", g.label), move |x| {
        Ok(x * theta(c * x * x, &ctx)? * g.eval(x)?)
    })
}

/// Residual of the Slater expansion of `_rW_r^*` for `r >= 5`.
///
/// Even `r` expands `W*(y)/θ(y²)` over `(r-4)/2` nodes; odd `r` expands
/// `θ(y√q) W*(y)/θ(y²)` over `(r-3)/2` nodes, both in `Ω(q)`.
pub fn slater_vwp_check(wspec: &WSpec, y: C64, zs: &[C64], ctx: &QContext) -> Result<f64> {
    let r = wspec.r();
    if r < 5 {
        return Err(QError::Domain(format!("VWP expansion needs r >= 5, got {r}")));
    }
    let nodes = if r.is_multiple_of(2) { (r - 4) / 2 } else { (r - 3) / 2 };
    if zs.len() != nodes {
        return Err(QError::Domain(format!("r = {r} needs {nodes} nodes, got {}", zs.len())));
    }
    let sq = ctx.sqrt_q();
    let reduced = |v: C64| -> Result<C64> {
        let base = w_star(wspec, v, ctx)? / guarded_theta(v * v, "θ(y²)", ctx)?;
        if r.is_multiple_of(2) {
            Ok(base)
        } else {
            Ok(base * theta(v * sq, ctx)?)
        }
    };
    let target = reduced(y)?;
    let values = zs.iter().map(|&z| reduced(z)).collect::<Result<Vec<_>>>()?;
    expansion_residual(target, &values, |j| omega_basis(j, zs, ctx.q(), y, ctx))
}

/// `Δ_n(x_1, ..., x_n) = Π_{j<k} x_k θ(x_j/x_k)`.
pub fn delta_n(xs: &[C64], ctx: &QContext) -> Result<C64> {
    let mut v = ONE;
    for k in 0..xs.len() {
        for j in 0..k {
            if xs[k] == ZERO {
                return Err(QError::Domain("Δ_n needs non-zero points".into()));
            }
            v *= xs[k] * theta(xs[j] / xs[k], ctx)?;
        }
    }
    Ok(v)
}

/// `det(f_i(x_j)) / (Δ_n(x) θ(c Π x_j))` at one node list.
pub fn theta_det_value(fs: &[SampledFunction], xs: &[C64], c: C64, ctx: &QContext) -> Result<C64> {
    let n = fs.len();
    if xs.len() != n {
        return Err(QError::Domain(format!("need {n} nodes, got {}", xs.len())));
    }
    let rows = fs
        .iter()
        .map(|f| xs.iter().map(|&x| f.eval(x)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let d = delta_n(xs, ctx)?;
    let t = theta(c * xs.iter().product::<C64>(), ctx)?;
    let den = d * t;
    if den.norm() < NODE_TOLERANCE {
        return Err(QError::DegenerateNodes(format!("Δ_n θ(c Π x) = {den} at nodes {xs:?}")));
    }
    Ok(det(&rows) / den)
}

/// Relative disagreement of the determinant ratio between two node lists.
pub fn theta_det_ratio(fs: &[SampledFunction], xss: [&[C64]; 2], c: C64, ctx: &QContext) -> Result<f64> {
    let r0 = theta_det_value(fs, xss[0], c, ctx)?;
    let r1 = theta_det_value(fs, xss[1], c, ctx)?;
    Ok((r0 - r1).norm() / (r0.norm() + ctx.eps()))
}

/// `σ_min/σ_max` of the sample matrix `f_i(z_j)`; tiny values mean the
/// functions are linearly dependent.
pub fn sample_conditioning(fs: &[SampledFunction], zs: &[C64]) -> Result<f64> {
    let rows = fs
        .iter()
        .map(|f| zs.iter().map(|&z| f.eval(z)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(conditioning_ratio(&rows))
}

/// Nodes are admissible when no pairwise ratio is within `tol` of a power of `q`.
pub fn nodes_admissible(zs: &[C64], tol: f64, ctx: &QContext) -> bool {
    for (i, &a) in zs.iter().enumerate() {
        if a == ZERO {
            return false;
        }
        for &b in &zs[i + 1..] {
            if ctx.same_q_class(a, b, tol) {
                return false;
            }
        }
    }
    true
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
    fn sample_points() -> Vec<C64> {
        (0..10)
            .map(|k| C64::from_polar(0.6 + 0.1 * k as f64, 0.3 + 0.6 * k as f64))
            .collect()
    }

    #[test]
    fn membership_examples() {
        let ctx = ctx();
        let rho = r(0.8);
        let f = SampledFunction::new("theta(x/rho)", move |x| theta(x / rho, &ctx));
        let tag = ThetaSpaceTag::new(1, ONE / rho).unwrap();
        assert!(theta_space_residual(&f, tag, &sample_points(), &ctx).unwrap() < 1e-10);

        let spec = SeriesSpec::from_real(&[2.0, 3.0], &[0.1, 0.15]).unwrap();
        let x0 = r(0.4);
        let g = SampledFunction::psi_star_in_y(spec.clone(), x0, ctx);
        let tag = ThetaSpaceTag::new(2, spec.a_product() * x0).unwrap();
        assert!(theta_space_residual(&g, tag, &sample_points(), &ctx).unwrap() < 1e-9);

        let one = SampledFunction::new("1", |_| Ok(ONE));
        let tag = ThetaSpaceTag::new(0, ONE).unwrap();
        assert_eq!(theta_space_residual(&one, tag, &sample_points(), &ctx).unwrap(), 0.0);
        assert!(ThetaSpaceTag::new(1, ZERO).is_err());
    }

    #[test]
    fn vartheta_cardinal_and_direct() {
        let ctx = ctx();
        let zs = [r(0.7), c(1.1, 0.3), c(-0.8, 0.5)];
        let cc = r(2.0);
        for j in 0..3 {
            for k in 0..3 {
                let v = vartheta_basis(j, &zs, cc, zs[k], &ctx).unwrap();
                let e = if j == k { ONE } else { ZERO };
                assert!((v - e).norm() < 1e-12, "j={j} k={k}: {v}");
            }
        }
        let v = vartheta_basis(0, &[r(0.7)], cc, r(0.9), &ctx).unwrap();
        let direct = theta(r(1.8), &ctx).unwrap() / theta(r(1.4), &ctx).unwrap();
        assert!((v - direct).norm() < 1e-12 * direct.norm());
        assert!(matches!(
            vartheta_basis(0, &[r(0.7), r(0.35)], cc, r(0.9), &ctx),
            Err(QError::DegenerateNodes(_))
        ));
    }

    #[test]
    fn slater_general_examples() {
        let ctx = ctx();
        let spec = SeriesSpec::from_real(&[2.0, 3.0], &[0.1, 0.15]).unwrap();
        let zs = [r(0.7), r(1.1)];
        assert!(slater_general_check(&spec, r(0.4), zs[0], &zs, &ctx).unwrap() < 1e-14);
        assert!(slater_general_check(&spec, r(0.4), r(0.9), &zs, &ctx).unwrap() < 1e-9);
        let s1 = SeriesSpec::from_real(&[2.0], &[0.3]).unwrap();
        assert!(slater_general_check(&s1, r(0.5), r(1.2), &[r(0.8)], &ctx).unwrap() < 1e-10);
    }

    #[test]
    fn omega_examples() {
        let ctx = ctx();
        let zs = [r(0.7), c(1.1, 0.3), c(-0.8, 0.5)];
        let cc = c(1.3, -0.2);
        for j in 0..3 {
            assert!((omega_basis(j, &zs, cc, zs[j], &ctx).unwrap() - ONE).norm() < 1e-12);
            let x = c(0.9, 0.4);
            let a = omega_basis(j, &zs, cc, x, &ctx).unwrap();
            let b = omega_basis(j, &zs, cc, ctx.q() / (cc * x), &ctx).unwrap();
            assert!((a - b).norm() < 1e-10 * a.norm());
        }
        assert_eq!(omega_basis(0, &[r(0.7)], cc, r(0.3), &ctx).unwrap(), ONE);
    }

    #[test]
    fn vwp_examples() {
        let ctx = ctx();
        let w6 = WSpec::from_real(&[1.5, 1.7, 1.9, 2.1]).unwrap();
        assert!(slater_vwp_check(&w6, r(0.8), &[r(1.3)], &ctx).unwrap() < 1e-9);
        let w8 = WSpec::from_real(&[1.4, 1.5, 1.6, 1.7, 1.8, 1.9]).unwrap();
        assert!(slater_vwp_check(&w8, r(0.9), &[r(0.8), r(1.2)], &ctx).unwrap() < 1e-8);
        let w5 = WSpec::from_real(&[1.6, 1.8, 2.0]).unwrap();
        assert!(slater_vwp_check(&w5, r(0.9), &[r(0.8)], &ctx).unwrap() < 1e-8);
    }

    #[test]
    fn delta_examples() {
        let ctx = ctx();
        assert_eq!(delta_n(&[r(0.7)], &ctx).unwrap(), ONE);
        assert_eq!(delta_n(&[r(0.7), r(0.7), r(1.2)], &ctx).unwrap(), ZERO);
        let (x1, x2) = (r(0.7), r(1.1));
        let d12 = delta_n(&[x1, x2], &ctx).unwrap();
        let d21 = delta_n(&[x2, x1], &ctx).unwrap();
        assert!((d12 - x2 * theta(x1 / x2, &ctx).unwrap()).norm() < 1e-15);
        // θ(1/u) = -θ(u)/u gives Δ(x2, x1) = -Δ(x1, x2)
        assert!((d21 + d12).norm() < 1e-12 * d12.norm());
    }

    #[test]
    fn determinant_examples() {
        let ctx = ctx();
        let cc = r(2.0);
        let f = SampledFunction::theta_product(vec![cc], ctx);
        let v = theta_det_value(&[f], &[r(0.9)], cc, &ctx).unwrap();
        assert!((v - ONE).norm() < 1e-14);

        let (al, be) = (r(0.8), r(1.3));
        let fs = [
            SampledFunction::theta_product(vec![al, cc / al], ctx),
            SampledFunction::theta_product(vec![be, cc / be], ctx),
        ];
        let xa = [r(0.7), c(1.1, 0.2)];
        let xb = [c(0.6, -0.4), r(1.4)];
        assert!(theta_det_ratio(&fs, [&xa, &xb], cc, &ctx).unwrap() < 1e-10);

        let spec = SeriesSpec::from_real(&[2.0, 3.0], &[0.1, 0.15]).unwrap();
        let x0 = r(0.4);
        let f1 = SampledFunction::psi_star_in_y(spec.clone(), x0, ctx);
        let s2 = spec.clone();
        let f2 = SampledFunction::new("y psi*(qx, y)", move |y| Ok(y * psi_star(&s2, ctx.q() * x0, y, &ctx)?));
        let c2 = spec.a_product() * x0;
        assert!(theta_det_ratio(&[f1, f2], [&xa, &xb], c2, &ctx).unwrap() < 1e-8);
    }

    #[test]
    fn dimension_and_reflection() {
        let ctx = ctx();
        let cc = c(1.2, 0.3);
        for n in [2usize, 3] {
            let members: Vec<SampledFunction> = (0..=n)
                .map(|i| {
                    let mut alphas: Vec<C64> = (0..n - 1)
                        .map(|k| C64::from_polar(0.8 + 0.15 * k as f64, 1.3 * i as f64 + 2.1 * k as f64))
                        .collect();
                    let p: C64 = alphas.iter().product();
                    alphas.push(cc / p);
                    SampledFunction::theta_product(alphas, ctx)
                })
                .collect();
            let nodes: Vec<C64> = (0..=n)
                .map(|k| C64::from_polar(0.6 + 0.3 * k as f64, 1.1 * k as f64))
                .collect();
            assert!(sample_conditioning(&members, &nodes).unwrap() < 1e-8);
            assert!(sample_conditioning(&members[..n], &nodes[..n]).unwrap() > 1e-4);
        }
        let f = SampledFunction::theta_product(vec![r(0.8), cc / r(0.8)], ctx);
        assert!(reflection_residual(&f, cc, 1.0, &sample_points(), &ctx).unwrap() < 1e-10);
    }

    #[test]
    fn omega_product_and_sign_lemma() {
        let ctx = ctx();
        let cc = c(0.9, 0.2);
        let g = SampledFunction::theta_product(vec![r(0.8), c(1.1, -0.3)], ctx);
        let f = reflected_product(&g, cc, ctx);
        let zs = [r(0.7), c(1.1, 0.3), c(-0.8, 0.5)];
        assert!(omega_expansion_residual(&f, &zs, cc, &sample_points(), &ctx).unwrap() < 1e-9);

        let spec = SeriesSpec::from_real(&[2.0, 3.0], &[0.1, 0.15]).unwrap();
        let p = SampledFunction::psi_star_in_y(spec, r(0.4), ctx);
        let pf = reflected_product(&p, cc, ctx);
        assert!(omega_expansion_residual(&pf, &zs, cc, &sample_points(), &ctx).unwrap() < 1e-8);

        // g in Ω_2(c), lifted to Ω-odd functions
        let h = SampledFunction::theta_product(vec![r(0.8), cc / r(0.8)], ctx);
        let lifted = odd_omega_lift(&h, cc, ctx);
        assert!(reflection_residual(&lifted, cc, -1.0, &sample_points(), &ctx).unwrap() < 1e-10);
    }
}
