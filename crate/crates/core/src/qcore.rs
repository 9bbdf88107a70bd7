//! q-Pochhammer symbols and the Jacobi theta function.
//!
//! Every infinite product is truncated deterministically: factors are
//! multiplied in increasing index order and the loop stops once
//! `consec_small` consecutive factors differ from one by less than
//! `eps * (1 - |q|)`, which bounds the neglected tail by `eps`.

use num_complex::Complex64;

use crate::error::{QError, Result};

pub type C64 = Complex64;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

/// Smallest and largest accepted |q|.
pub const MIN_ABS_Q: f64 = 1e-6;
pub const MAX_ABS_Q: f64 = 0.9;

/// Base `q` together with the truncation policy shared by every evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QContext {
    q: C64,
    eps: f64,
    max_terms: usize,
    consec_small: usize,
    sqrt_q: C64,
    q_inf: C64,
}

impl QContext {
    pub const DEFAULT_EPS: f64 = 1e-13;
    pub const DEFAULT_MAX_TERMS: usize = 4096;
    pub const DEFAULT_CONSEC_SMALL: usize = 3;

    pub fn new(q: C64) -> Result<Self> {
        Self::with_policy(
            q,
            Self::DEFAULT_EPS,
            Self::DEFAULT_MAX_TERMS,
            Self::DEFAULT_CONSEC_SMALL,
        )
    }

    pub fn real(q: f64) -> Result<Self> {
        Self::new(C64::new(q, 0.0))
    }

    pub fn with_policy(q: C64, eps: f64, max_terms: usize, consec_small: usize) -> Result<Self> {
        let aq = q.norm();
        if !aq.is_finite() || !(MIN_ABS_Q..=MAX_ABS_Q).contains(&aq) {
            return Err(QError::Domain(format!(
                "|q| = {aq} must lie in [{MIN_ABS_Q}, {MAX_ABS_Q}]"
            )));
        }
        if !(eps > 0.0 && eps < 1e-3) {
            return Err(QError::Domain(format!("eps = {eps} must lie in (0, 1e-3)")));
        }
        if max_terms < 64 {
            return Err(QError::Domain(format!("max_terms = {max_terms} must be >= 64")));
        }
        if consec_small < 2 {
            return Err(QError::Domain(format!("consec_small = {consec_small} must be >= 2")));
        }
        let mut ctx = QContext {
            q,
            eps,
            max_terms,
            consec_small,
            sqrt_q: q.sqrt(),
            q_inf: ONE,
        };
        ctx.q_inf = qpoch_inf(q, &ctx)?;
        Ok(ctx)
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::with_policy(self.q, eps, self.max_terms, self.consec_small)
    }

    pub fn with_max_terms(&self, max_terms: usize) -> Result<Self> {
        Self::with_policy(self.q, self.eps, max_terms, self.consec_small)
    }

    pub fn q(&self) -> C64 {
        self.q
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn max_terms(&self) -> usize {
        self.max_terms
    }
    pub fn consec_small(&self) -> usize {
        self.consec_small
    }
    /// Principal square root of `q`.
    pub fn sqrt_q(&self) -> C64 {
        self.sqrt_q
    }
    /// `(q)_∞`, cached at construction.
    pub fn q_inf(&self) -> C64 {
        self.q_inf
    }
    /// Relative convergence margin `eps^{1/4}` used for annulus checks.
    pub fn margin(&self) -> f64 {
        self.eps.powf(0.25)
    }

    /// `q^k` for any integer `k`.
    pub fn qpow(&self, k: i64) -> C64 {
        self.q.powi(k as i32)
    }

    /// Multiplies `z` by the power of `q` that places it in `|q| < |z·anchor| <= 1`.
    /// Returns the reduced value and the exponent used.
    pub fn reduce_to_band(&self, z: C64, anchor: C64) -> (C64, i64) {
        let lq = self.q.norm().ln();
        let l = (z * anchor).norm().ln();
        let mut k = (-l / lq).ceil() as i64;
        let mut w = z * self.qpow(k);
        // guard the ceil against rounding at the band edges
        if (w * anchor).norm() > 1.0 {
            k += 1;
            w = z * self.qpow(k);
        } else if (w * anchor).norm() <= self.q.norm() {
            k -= 1;
            w = z * self.qpow(k);
        }
        (w, k)
    }

    /// Nearest integer `k` with `z ≈ q^k`, and the relative mismatch `|z/q^k - 1|`.
    pub fn nearest_q_power(&self, z: C64) -> (i64, f64) {
        let k = (z.norm().ln() / self.q.norm().ln()).round() as i64;
        let err = (z / self.qpow(k) - ONE).norm();
        (k, err)
    }

    /// True when `a/b` is within `tol` (relative) of an integer power of `q`.
    pub fn same_q_class(&self, a: C64, b: C64, tol: f64) -> bool {
        if a == ZERO || b == ZERO {
            return false;
        }
        self.nearest_q_power(a / b).1 < tol
    }

    /// Distance in log space between `y` and the lattice `rho·q^ℤ`.
    pub fn lattice_log_distance(&self, y: C64, rho: C64) -> f64 {
        let half = C64::new(self.q.norm().sqrt(), 0.0);
        let (w, _) = self.reduce_to_band(y / rho, ONE / half);
        w.ln().norm()
    }
}

/// Result of a truncated infinite product or series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationOutcome {
    pub value: C64,
    pub terms_used: usize,
    pub converged: bool,
}

impl TruncationOutcome {
    /// Converts a non-converged outcome into `NotConverged`.
    pub fn into_result(self, what: &str) -> Result<C64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(QError::NotConverged {
                what: what.to_string(),
                terms: self.terms_used,
            })
        }
    }
}

/// `1/z` without the overflow of `norm_sqr` for very large or small `|z|`.
pub fn recip(z: C64) -> C64 {
    let s = z.re.abs().max(z.im.abs());
    let w = z / s;
    w.conj() / (w.norm_sqr() * s)
}

/// Finite q-Pochhammer symbol `(x)_n` for any integer `n`.
pub fn qpoch(x: C64, n: i64, ctx: &QContext) -> Result<C64> {
    let q = ctx.q();
    if n >= 0 {
        let mut p = ONE;
        let mut qm = ONE;
        for _ in 0..n {
            p *= ONE - x * qm;
            qm *= q;
        }
        Ok(p)
    } else {
        let qinv = ONE / q;
        let mut p = ONE;
        // m = -1, -2, ..., n
        let mut qm = qinv;
        for m in 1..=(-n) {
            let t = x * qm;
            let f = ONE - t;
            if f.norm() <= 4.0 * f64::EPSILON * (1.0 + t.norm()) {
                return Err(QError::DivisionByZero(format!(
                    "factor 1 - x q^{} vanishes at x = {x}",
                    -m
                )));
            }
            p *= f;
            qm *= qinv;
        }
        Ok(recip(p))
    }
}

/// Truncated `(x)_∞` with its term count.
pub fn qpoch_inf_outcome(x: C64, ctx: &QContext) -> TruncationOutcome {
    let q = ctx.q();
    let cutoff = ctx.eps() * (1.0 - q.norm());
    let mut p = ONE;
    let mut t = x;
    let mut run = 0usize;
    for m in 0..ctx.max_terms() {
        p *= ONE - t;
        if t.norm() < cutoff {
            run += 1;
            if run >= ctx.consec_small() {
                return TruncationOutcome {
                    value: p,
                    terms_used: m + 1,
                    converged: true,
                };
            }
        } else {
            run = 0;
        }
        t *= q;
    }
    TruncationOutcome {
        value: p,
        terms_used: ctx.max_terms(),
        converged: false,
    }
}

/// Infinite q-Pochhammer symbol `(x)_∞`.
pub fn qpoch_inf(x: C64, ctx: &QContext) -> Result<C64> {
    qpoch_inf_outcome(x, ctx).into_result("(x)_inf")
}

/// `(x_1, ..., x_m)_n`, the product of `qpoch(x_i, n)`.
pub fn qpoch_multi(xs: &[C64], n: i64, ctx: &QContext) -> Result<C64> {
    xs.iter().try_fold(ONE, |acc, &x| Ok(acc * qpoch(x, n, ctx)?))
}

/// `(x_1, ..., x_m)_∞`.
pub fn qpoch_inf_multi(xs: &[C64], ctx: &QContext) -> Result<C64> {
    xs.iter().try_fold(ONE, |acc, &x| Ok(acc * qpoch_inf(x, ctx)?))
}

/// Jacobi theta function `θ(x) = (x, q/x, q)_∞`.
pub fn theta(x: C64, ctx: &QContext) -> Result<C64> {
    if x == ZERO {
        return Err(QError::Domain("theta(0) is undefined".into()));
    }
    Ok(qpoch_inf(x, ctx)? * qpoch_inf(ctx.q() / x, ctx)? * ctx.q_inf())
}

/// Product of `theta` over a list of arguments.
pub fn theta_product(xs: &[C64], ctx: &QContext) -> Result<C64> {
    xs.iter().try_fold(ONE, |acc, &x| Ok(acc * theta(x, ctx)?))
}

/// Smallest `|1 - z q^m|` over `m >= 0`, i.e. how close `(z)_∞` is to vanishing.
pub fn min_factor_modulus(z: C64, ctx: &QContext) -> f64 {
    let mut best = f64::INFINITY;
    let mut t = z;
    for _ in 0..ctx.max_terms() {
        best = best.min((ONE - t).norm());
        if t.norm() < 0.25 {
            break;
        }
        t *= ctx.q();
    }
    best
}

/// Smallest factor modulus of `θ(z)`, i.e. distance of `z` from `q^ℤ` in factor terms.
pub fn theta_clearance(z: C64, ctx: &QContext) -> f64 {
    if z == ZERO {
        return 0.0;
    }
    min_factor_modulus(z, ctx).min(min_factor_modulus(ctx.q() / z, ctx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn context_rejects_out_of_band_q() {
        assert!(QContext::real(0.95).is_err());
        assert!(QContext::real(1e-7).is_err());
        assert!(QContext::real(0.5).is_ok());
        let ctx = QContext::real(0.5).unwrap();
        assert!(ctx.with_eps(1e-2).is_err());
        assert!(ctx.with_max_terms(10).is_err());
        assert!(QContext::with_policy(c(0.5, 0.0), 1e-12, 100, 1).is_err());
    }

    #[test]
    fn qpoch_trivial_values() {
        let ctx = QContext::real(0.5).unwrap();
        let x = c(0.3, -0.7);
        assert_eq!(qpoch(x, 0, &ctx).unwrap(), ONE);
        let m1 = qpoch(x, -1, &ctx).unwrap();
        assert!(rel(m1, ONE / (ONE - x / ctx.q())) < 1e-15);
    }

    #[test]
    fn qpoch_matches_reverse_order_product() {
        let ctx = QContext::real(0.5).unwrap();
        let x = c(0.25, 0.0);
        let mut oracle = ONE;
        for m in (0..8).rev() {
            oracle *= ONE - x * 0.5f64.powi(m);
        }
        assert!(rel(qpoch(x, 8, &ctx).unwrap(), oracle) < 1e-14);
    }

    #[test]
    fn qpoch_negative_index_pole() {
        let ctx = QContext::real(0.5).unwrap();
        // 1 - x q^{-2} = 0 at x = q^2
        let err = qpoch(c(0.25, 0.0), -3, &ctx).unwrap_err();
        assert!(matches!(err, QError::DivisionByZero(_)));
    }

    #[test]
    fn qpoch_inf_values() {
        let ctx = QContext::real(0.5).unwrap();
        assert_eq!(qpoch_inf(ZERO, &ctx).unwrap(), ONE);
        let x = c(0.3, 0.1);
        let lhs = qpoch_inf(x, &ctx).unwrap();
        let rhs = (ONE - x) * qpoch_inf(x * ctx.q(), &ctx).unwrap();
        assert!(rel(lhs, rhs) < ctx.eps());

        // log-space oracle over 64 terms
        let mut s = 0.0f64;
        for m in 0..64 {
            s += (1.0 - 0.25 * 0.5f64.powi(m)).ln();
        }
        let oracle = C64::new(s.exp(), 0.0);
        assert!(rel(qpoch_inf(c(0.25, 0.0), &ctx).unwrap(), oracle) < 1e-12);
    }

    #[test]
    fn qpoch_inf_reports_non_convergence() {
        let ctx = QContext::real(0.5).unwrap().with_max_terms(64).unwrap();
        let out = qpoch_inf_outcome(c(1e30, 0.0), &ctx);
        assert!(!out.converged);
        assert!(matches!(out.into_result("test"), Err(QError::NotConverged { .. })));
    }

    #[test]
    fn qpoch_multi_is_componentwise() {
        let ctx = QContext::real(0.5).unwrap();
        assert_eq!(qpoch_multi(&[], 5, &ctx).unwrap(), ONE);
        let x = c(0.2, 0.1);
        assert_eq!(qpoch_multi(&[x], 4, &ctx).unwrap(), qpoch(x, 4, &ctx).unwrap());
        let v = qpoch_multi(&[c(0.2, 0.0), c(0.3, 0.0)], 5, &ctx).unwrap();
        let o = qpoch(c(0.2, 0.0), 5, &ctx).unwrap() * qpoch(c(0.3, 0.0), 5, &ctx).unwrap();
        assert!(rel(v, o) < 1e-14);
    }

    #[test]
    fn theta_basic_identities() {
        let ctx = QContext::real(0.5).unwrap();
        assert_eq!(theta(ONE, &ctx).unwrap(), ZERO);
        assert!(matches!(theta(ZERO, &ctx), Err(QError::Domain(_))));
        let x = c(0.4, -0.2);
        let t = theta(x, &ctx).unwrap();
        assert!(rel(theta(ctx.q() / x, &ctx).unwrap(), t) < ctx.eps());
        let x = c(0.7, 0.0);
        let t = theta(x, &ctx).unwrap();
        let shifted = theta(ctx.q() * x, &ctx).unwrap();
        assert!(rel(shifted, -t / x) < ctx.eps());
    }

    #[test]
    fn band_reduction() {
        let ctx = QContext::new(c(0.3, 0.2)).unwrap();
        for z in [c(5.0, 1.0), c(0.01, -0.02), c(0.5, 0.5), ctx.q()] {
            let (w, k) = ctx.reduce_to_band(z, ONE);
            assert!(w.norm() <= 1.0 + 1e-15 && w.norm() > ctx.q().norm());
            assert!(rel(w, z * ctx.qpow(k)) < 1e-14);
            assert!(ctx.same_q_class(w, z, 1e-12));
        }
    }
}
