//! Bilateral `_rψ_r` and very-well-poised `_rW_r` series and their analytic
//! numerators `ψ*` and `W*`.

use crate::error::{QError, Result};
use crate::qcore::{qpoch_inf, QContext, C64, ONE, ZERO};

/// Parameters of the family `Σ (a_1 y, ..., a_r y)_n / (b_1 y, ..., b_r y)_n x^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSpec {
    a: Vec<C64>,
    b: Vec<C64>,
}

impl SeriesSpec {
    pub fn new(a: Vec<C64>, b: Vec<C64>) -> Result<Self> {
        if a.is_empty() {
            return Err(QError::Domain("series order r must be positive".into()));
        }
        if a.len() != b.len() {
            return Err(QError::Domain(format!(
                "parameter lists differ in length: {} numerator vs {} denominator",
                a.len(),
                b.len()
            )));
        }
        if a.contains(&ZERO) {
            return Err(QError::Domain("numerator parameters must be non-zero".into()));
        }
        Ok(SeriesSpec { a, b })
    }

    pub fn from_real(a: &[f64], b: &[f64]) -> Result<Self> {
        Self::new(
            a.iter().map(|&v| C64::new(v, 0.0)).collect(),
            b.iter().map(|&v| C64::new(v, 0.0)).collect(),
        )
    }

    pub fn r(&self) -> usize {
        self.a.len()
    }
    pub fn a(&self) -> &[C64] {
        &self.a
    }
    pub fn b(&self) -> &[C64] {
        &self.b
    }
    pub fn a_product(&self) -> C64 {
        self.a.iter().product()
    }
    pub fn b_product(&self) -> C64 {
        self.b.iter().product()
    }
    /// `b_1⋯b_r / (a_1⋯a_r)`.
    pub fn balance(&self) -> C64 {
        self.b_product() / self.a_product()
    }
}

/// Parameters `a_1, ..., a_{r-2}` of the VWP-balanced series `_rW_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct WSpec {
    a: Vec<C64>,
}

impl WSpec {
    pub fn new(a: Vec<C64>) -> Result<Self> {
        if a.is_empty() {
            return Err(QError::Domain("_rW_r needs r >= 3".into()));
        }
        if a.contains(&ZERO) {
            return Err(QError::Domain("W parameters must be non-zero".into()));
        }
        Ok(WSpec { a })
    }

    pub fn from_real(a: &[f64]) -> Result<Self> {
        Self::new(a.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn r(&self) -> usize {
        self.a.len() + 2
    }
    pub fn a(&self) -> &[C64] {
        &self.a
    }

    /// The argument `q^{(r-4)/2} / (a_1⋯a_{r-2})`, using the principal `√q`.
    pub fn argument(&self, ctx: &QContext) -> C64 {
        let p: C64 = self.a.iter().product();
        ctx.sqrt_q().powi(self.r() as i32 - 4) / p
    }
}

/// Moduli bounds of the convergence annulus in `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    pub inner: f64,
    pub outer: f64,
}

impl Annulus {
    pub fn is_empty(&self) -> bool {
        self.inner >= self.outer
    }

    /// Whether `|x|` sits inside with relative margin `m` on both sides.
    pub fn contains_with_margin(&self, x: C64, m: f64) -> bool {
        let ax = x.norm();
        !self.is_empty() && ax >= self.inner * (1.0 + m) && ax <= self.outer * (1.0 - m)
    }
}

/// A summed series with the bookkeeping needed for absolute-zero tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: C64,
    /// Largest single-term magnitude encountered (after any prefactor).
    pub scale: f64,
    pub terms_used: usize,
}

pub fn psi_annulus(spec: &SeriesSpec, _ctx: &QContext) -> Annulus {
    Annulus {
        inner: spec.balance().norm(),
        outer: 1.0,
    }
}

fn check_annulus(spec: &SeriesSpec, x: C64, ctx: &QContext) -> Result<()> {
    let ann = psi_annulus(spec, ctx);
    if ann.contains_with_margin(x, ctx.margin()) {
        Ok(())
    } else {
        Err(QError::OutsideAnnulus {
            modulus: x.norm(),
            inner: ann.inner,
            outer: ann.outer,
        })
    }
}

fn pole(what: &str, n: i64, y: C64) -> QError {
    QError::DivisionByZero(format!("{what} vanishes at n = {n}, y = {y}"))
}

fn is_zero_factor(f: C64, t: C64) -> bool {
    f.norm() <= 4.0 * f64::EPSILON * (1.0 + t.norm())
}

struct Direction {
    base: C64,
    prev_norm: f64,
    run: usize,
    done: bool,
}

/// Sums `Σ_n base_n·weight(n)` over all integers in the order 0, 1, -1, 2, -2, ...
///
/// `fwd(n)` returns `base_{n+1}/base_n`, `bwd(n)` returns `base_{n-1}/base_n`.
/// A direction stops once `consec_small` successive terms are below
/// `eps·(1 + |partial sum|)` without growing.
fn bilateral_sum(
    ctx: &QContext,
    mut fwd: impl FnMut(i64) -> Result<C64>,
    mut bwd: impl FnMut(i64) -> Result<C64>,
    weight: impl Fn(i64) -> C64,
) -> Result<SeriesValue> {
    let t0 = weight(0);
    let mut sum = t0;
    let mut scale = t0.norm();
    let mut terms = 1usize;
    let mut dirs = [
        Direction {
            base: ONE,
            prev_norm: t0.norm(),
            run: 0,
            done: false,
        },
        Direction {
            base: ONE,
            prev_norm: t0.norm(),
            run: 0,
            done: false,
        },
    ];
    let mut k: i64 = 0;
    while !(dirs[0].done && dirs[1].done) {
        k += 1;
        if k as usize > ctx.max_terms() {
            return Err(QError::NotConverged {
                what: "bilateral series".into(),
                terms,
            });
        }
        for (side, dir) in dirs.iter_mut().enumerate() {
            if dir.done {
                continue;
            }
            let (n, ratio) = if side == 0 {
                (k, fwd(k - 1)?)
            } else {
                (-k, bwd(-k + 1)?)
            };
            dir.base *= ratio;
            let t = dir.base * weight(n);
            sum += t;
            terms += 1;
            let tn = t.norm();
            scale = scale.max(tn);
            if tn < ctx.eps() * (1.0 + sum.norm()) && tn <= dir.prev_norm {
                dir.run += 1;
                if dir.run >= ctx.consec_small() {
                    dir.done = true;
                }
            } else {
                dir.run = 0;
            }
            dir.prev_norm = tn;
        }
    }
    Ok(SeriesValue {
        value: sum,
        scale,
        terms_used: terms,
    })
}

/// The n-th summand of `_rψ_r(x, y)`.
///
/// Built as a product of factor ratios so that deep negative indices neither
/// overflow nor underflow the individual Pochhammer symbols.
pub fn psi_term(spec: &SeriesSpec, x: C64, y: C64, n: i64, ctx: &QContext) -> Result<C64> {
    let q = ctx.q();
    let mut t = ONE;
    if n >= 0 {
        let mut qm = ONE;
        for _ in 0..n {
            for (&a, &b) in spec.a().iter().zip(spec.b()) {
                let den = ONE - b * y * qm;
                if is_zero_factor(den, b * y * qm) {
                    return Err(pole("denominator Pochhammer", n, y));
                }
                t *= (ONE - a * y * qm) / den;
            }
            t *= x;
            qm *= q;
        }
    } else {
        let qinv = ONE / q;
        let mut qm = qinv;
        for _ in 0..(-n) {
            for (&a, &b) in spec.a().iter().zip(spec.b()) {
                let den = ONE - a * y * qm;
                if is_zero_factor(den, a * y * qm) {
                    return Err(pole("numerator Pochhammer at negative index", n, y));
                }
                t *= (ONE - b * y * qm) / den;
            }
            t /= x;
            qm *= qinv;
        }
    }
    Ok(t)
}

fn psi_sum_unchecked(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<SeriesValue> {
    let q = ctx.q();
    let qinv = ONE / q;
    let ay: Vec<C64> = spec.a().iter().map(|&a| a * y).collect();
    let by: Vec<C64> = spec.b().iter().map(|&b| b * y).collect();
    let mut qn_f = ONE; // q^n for the forward step
    let mut qn_b = qinv; // q^{n-1} for the backward step
    let fwd = |n: i64| -> Result<C64> {
        let _ = n;
        let mut r = x;
        for (&a, &b) in ay.iter().zip(&by) {
            let den = ONE - b * qn_f;
            if is_zero_factor(den, b * qn_f) {
                return Err(pole("1 - b_j y q^n", n, y));
            }
            r *= (ONE - a * qn_f) / den;
        }
        qn_f *= q;
        Ok(r)
    };
    let bwd = |n: i64| -> Result<C64> {
        let mut r = ONE / x;
        for (&a, &b) in ay.iter().zip(&by) {
            let den = ONE - a * qn_b;
            if is_zero_factor(den, a * qn_b) {
                return Err(pole("1 - a_j y q^(n-1)", n, y));
            }
            r *= (ONE - b * qn_b) / den;
        }
        qn_b *= qinv;
        Ok(r)
    };
    bilateral_sum(ctx, fwd, bwd, |_| ONE)
}

/// `_rψ_r(x, y)` summed inside its annulus of convergence.
pub fn psi_sum(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<SeriesValue> {
    check_annulus(spec, x, ctx)?;
    psi_sum_unchecked(spec, x, y, ctx)
}

pub fn psi(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<C64> {
    Ok(psi_sum(spec, x, y, ctx)?.value)
}

/// `(x, B/x)_∞ · Π_j (q/(a_j y), b_j y)_∞`, the normalizer turning `ψ` into `ψ*`.
pub fn psi_normalizer(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<C64> {
    let q = ctx.q();
    let mut p = qpoch_inf(x, ctx)? * qpoch_inf(spec.balance() / x, ctx)?;
    for (&a, &b) in spec.a().iter().zip(spec.b()) {
        p *= qpoch_inf(q / (a * y), ctx)? * qpoch_inf(b * y, ctx)?;
    }
    Ok(p)
}

/// `ψ*(x, y)` with the term scale carried through the normalizer.
pub fn psi_star_sum(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<SeriesValue> {
    let s = psi_sum(spec, x, y, ctx)?;
    let norm = psi_normalizer(spec, x, y, ctx)?;
    Ok(SeriesValue {
        value: s.value * norm,
        scale: s.scale * norm.norm(),
        terms_used: s.terms_used,
    })
}

pub fn psi_star(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<C64> {
    Ok(psi_star_sum(spec, x, y, ctx)?.value)
}

/// Largest |x| at which `psi_star_extended` still sums the series directly.
pub const DIRECT_SUM_MAX_ABS_X: f64 = 0.9;

/// Coefficient `c_j(x)` in `ψ*(x,y) = Σ_{j=1}^r c_j(x) ψ*(x q^j, y)`.
///
/// This is the `x`-shift relation satisfied by `ψ*` divided through by its
/// `j = 0` coefficient `λ_0(x) = x - 1`.
fn shift_coefficients(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<Vec<C64>> {
    let q = ctx.q();
    let lambdas = crate::wronskian::lambda_coeffs(spec, x, ctx);
    let bal = spec.balance();
    let mut out = Vec::with_capacity(spec.r());
    let mut yj = ONE;
    for j in 1..=spec.r() as i64 {
        yj *= y;
        // (qx)_{j-1}
        let num = crate::qcore::qpoch(q * x, j - 1, ctx)?;
        // (B q^{-j} / x)_j
        let den = crate::qcore::qpoch(bal * ctx.qpow(-j) / x, j, ctx)?;
        if den.norm() < 1e-300 {
            return Err(QError::DivisionByZero(format!("shift relation coefficient at x = {x}")));
        }
        out.push(yj * lambdas.lambdas[j as usize] * num / den);
    }
    Ok(out)
}

/// `ψ*(x, y)` for `x` inside the annulus or beyond its outer edge.
///
/// Inside `|x| <= 0.9` the series is summed directly. Further out, including
/// `|x| >= 1`, the value is rebuilt from directly summed values at `x q^j`
/// through the `x`-shift relation, which `ψ*` satisfies for every `x ≠ 0`.
pub fn psi_star_extended(spec: &SeriesSpec, x: C64, y: C64, ctx: &QContext) -> Result<C64> {
    let ann = psi_annulus(spec, ctx);
    let m = ctx.margin();
    let direct_ok = |z: C64| z.norm() <= DIRECT_SUM_MAX_ABS_X && ann.contains_with_margin(z, m);
    if direct_ok(x) {
        return psi_star(spec, x, y, ctx);
    }
    if x.norm() < ann.inner * (1.0 + m) || ann.is_empty() {
        return Err(QError::OutsideAnnulus {
            modulus: x.norm(),
            inner: ann.inner,
            outer: ann.outer,
        });
    }
    let r = spec.r();
    let q = ctx.q();
    // smallest K with x q^K, ..., x q^{K+r-1} all directly summable
    let mut k0 = None;
    for k in 1..=64usize {
        let ok = (0..r).all(|j| direct_ok(x * q.powi((k + j) as i32)));
        if ok {
            k0 = Some(k);
            break;
        }
        if (x * q.powi(k as i32)).norm() < ann.inner {
            break;
        }
    }
    let k0 = k0.ok_or(QError::OutsideAnnulus {
        modulus: x.norm(),
        inner: ann.inner,
        outer: ann.outer,
    })?;
    // values[i] = ψ*(x q^i, y) for i in 0..k0+r
    let mut values = vec![ZERO; k0 + r];
    for i in k0..k0 + r {
        values[i] = psi_star(spec, x * q.powi(i as i32), y, ctx)?;
    }
    for i in (0..k0).rev() {
        let xi = x * q.powi(i as i32);
        let coeffs = shift_coefficients(spec, xi, y, ctx)?;
        values[i] = coeffs.iter().enumerate().map(|(j, &c)| c * values[i + j + 1]).sum();
    }
    Ok(values[0])
}

/// Limit of `ψ*(x, y)` as `x → 1⁻`, by Neville extrapolation of `ψ*(1 - t, y)`
/// over `t = 0.04·2^{-k}`, `k = 0..6`.
pub fn psi_star_limit_x1(spec: &SeriesSpec, y: C64, ctx: &QContext) -> Result<C64> {
    let fine = QContext::with_policy(ctx.q(), 1e-15, 200_000, ctx.consec_small())?;
    let ts: Vec<f64> = (0..6).map(|k| 0.04 / f64::powi(2.0, k)).collect();
    let mut vals = Vec::with_capacity(ts.len());
    for &t in &ts {
        vals.push(psi_star(spec, C64::new(1.0 - t, 0.0), y, &fine)?);
    }
    Ok(neville_at_zero(&ts, &vals))
}

/// Polynomial extrapolation of the samples `(t_i, v_i)` to `t = 0`.
pub fn neville_at_zero(ts: &[f64], vals: &[C64]) -> C64 {
    let n = ts.len();
    let mut p = vals.to_vec();
    for level in 1..n {
        for i in 0..n - level {
            let (ti, tj) = (ts[i], ts[i + level]);
            p[i] = (p[i + 1] * ti - p[i] * tj) / (ti - tj);
        }
    }
    p[0]
}

fn check_w_convergence(wspec: &WSpec, ctx: &QContext) -> Result<C64> {
    let z = wspec.argument(ctx);
    if z.norm() > 1.0 - ctx.margin() {
        return Err(QError::Domain(format!(
            "_{}W_{} diverges: |a_1⋯a_(r-2)| must exceed |q|^((r-4)/2) (series ratio {})",
            wspec.r(),
            wspec.r(),
            z.norm()
        )));
    }
    Ok(z)
}

/// `_rW_r(y)` summed bilaterally, with its term scale.
pub fn w_series_sum(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<SeriesValue> {
    if y == ZERO {
        return Err(QError::Domain("_rW_r needs y != 0".into()));
    }
    let z = check_w_convergence(wspec, ctx)?;
    let q = ctx.q();
    let qinv = ONE / q;
    let ay: Vec<C64> = wspec.a().iter().map(|&a| a * y).collect();
    let ya: Vec<C64> = wspec.a().iter().map(|&a| y / a).collect();
    let mut qn_f = ONE;
    let mut qn_b = ONE;
    let fwd = |n: i64| -> Result<C64> {
        // base_{n+1}/base_n = z Π (1 - a_j y q^n)/(1 - y q^{n+1}/a_j)
        let mut r = z;
        for (&a, &b) in ay.iter().zip(&ya) {
            let t = b * qn_f * q;
            let den = ONE - t;
            if is_zero_factor(den, t) {
                return Err(pole("1 - y q^(n+1)/a_j", n, y));
            }
            r *= (ONE - a * qn_f) / den;
        }
        qn_f *= q;
        Ok(r)
    };
    let bwd = |n: i64| -> Result<C64> {
        // base_{n-1}/base_n = Π (1 - y q^n/a_j)/(1 - a_j y q^{n-1}) / z
        let mut r = ONE / z;
        for (&a, &b) in ay.iter().zip(&ya) {
            let t = a * qn_b * qinv;
            let den = ONE - t;
            if is_zero_factor(den, t) {
                return Err(pole("1 - a_j y q^(n-1)", n, y));
            }
            r *= (ONE - b * qn_b) / den;
        }
        qn_b *= qinv;
        Ok(r)
    };
    let y2 = y * y;
    let q2 = q * q;
    bilateral_sum(ctx, fwd, bwd, |n| ONE - y2 * q2.powi(n as i32))
}

/// The n-th summand of `_rW_r(y)`, including the `(1 - y² q^{2n})` factor.
pub fn w_term(wspec: &WSpec, y: C64, n: i64, ctx: &QContext) -> Result<C64> {
    let q = ctx.q();
    let z = wspec.argument(ctx);
    let mut t = ONE;
    if n >= 0 {
        let mut qm = ONE;
        for _ in 0..n {
            for &a in wspec.a() {
                let d = q * y * qm / a;
                if is_zero_factor(ONE - d, d) {
                    return Err(pole("1 - q y q^m / a_j", n, y));
                }
                t *= (ONE - a * y * qm) / (ONE - d);
            }
            t *= z;
            qm *= q;
        }
    } else {
        let qinv = ONE / q;
        let mut qm = qinv;
        for _ in 0..(-n) {
            for &a in wspec.a() {
                let d = a * y * qm;
                if is_zero_factor(ONE - d, d) {
                    return Err(pole("1 - a_j y q^m", n, y));
                }
                t *= (ONE - q * y * qm / a) / (ONE - d);
            }
            t /= z;
            qm *= qinv;
        }
    }
    Ok(t * (ONE - y * y * q.powi(2 * n as i32)))
}

pub fn w_series(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<C64> {
    Ok(w_series_sum(wspec, y, ctx)?.value)
}

/// `(z, q/(a_1 y), q y/a_1, ..., q/(a_{r-2} y), q y/a_{r-2})_∞`.
pub fn w_normalizer(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<C64> {
    let q = ctx.q();
    let mut p = qpoch_inf(wspec.argument(ctx), ctx)?;
    for &a in wspec.a() {
        p *= qpoch_inf(q / (a * y), ctx)? * qpoch_inf(q * y / a, ctx)?;
    }
    Ok(p)
}

pub fn w_star_sum(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<SeriesValue> {
    let s = w_series_sum(wspec, y, ctx)?;
    let norm = w_normalizer(wspec, y, ctx)?;
    Ok(SeriesValue {
        value: s.value * norm,
        scale: s.scale * norm.norm(),
        terms_used: s.terms_used,
    })
}

pub fn w_star(wspec: &WSpec, y: C64, ctx: &QContext) -> Result<C64> {
    Ok(w_star_sum(wspec, y, ctx)?.value)
}
