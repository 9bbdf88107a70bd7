//! Library values against independent, deliberately naive re-implementations.

use qseries::classical::{q_gauss, six_psi_six};
use qseries::elliptic::{inversion_kernel, InversionConstants};
use qseries::qcore::{qpoch, qpoch_inf, theta, QContext, C64};
use qseries::series::{psi, w_series, SeriesSpec, WSpec};
use qseries::wronskian::{gustafson_ratio, gustafson_value};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

/// `(x)_n` straight from the definition, negative `n` included.
fn naive_poch(x: C64, n: i64, q: C64) -> C64 {
    if n >= 0 {
        (0..n).map(|m| C64::new(1.0, 0.0) - x * q.powi(m as i32)).product()
    } else {
        let d: C64 = (1..=-n).map(|k| C64::new(1.0, 0.0) - x * q.powi(-k as i32)).product();
        d.inv()
    }
}

/// `(a)_n / (b)_n` from the definition, one factor pair per index so that
/// neither Pochhammer overflows on its own.
fn naive_poch_ratio(a: C64, b: C64, n: i64, q: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    if n >= 0 {
        (0..n)
            .map(|m| (one - a * q.powi(m as i32)) / (one - b * q.powi(m as i32)))
            .product()
    } else {
        (1..=-n)
            .map(|k| (one - b * q.powi(-k as i32)) / (one - a * q.powi(-k as i32)))
            .product()
    }
}

#[test]
fn qpoch_reverse_order_product() {
    let ctx = QContext::real(0.5).unwrap();
    let q = ctx.q();
    let oracle: C64 = (0..8).rev().map(|m| C64::new(1.0, 0.0) - 0.25 * q.powi(m)).product();
    assert!(rel(qpoch(c(0.25, 0.0), 8, &ctx).unwrap(), oracle) < 1e-14);
}

#[test]
fn qpoch_inf_log_space() {
    let ctx = QContext::real(0.5).unwrap();
    let log: C64 = (0..64).map(|m| (C64::new(1.0, 0.0) - 0.25 * 0.5f64.powi(m)).ln()).sum();
    assert!(rel(qpoch_inf(c(0.25, 0.0), &ctx).unwrap(), log.exp()) < 1e-12);
}

#[test]
fn theta_matches_triple_product_series() {
    // θ(x) = (x, q/x, q)_∞ = Σ (-1)^n q^{n(n-1)/2} x^n
    for q in [c(0.5, 0.0), c(0.3, 0.2), c(0.6, 0.0)] {
        let ctx = QContext::new(q).unwrap();
        for x in [c(0.7, 0.2), c(-1.3, 0.4), c(0.2, -0.9)] {
            let series: C64 = (-60i32..=60)
                .map(|n| {
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    sign * q.powi(n * (n - 1) / 2) * x.powi(n)
                })
                .sum();
            assert!(rel(theta(x, &ctx).unwrap(), series) < 1e-12, "q={q} x={x}");
        }
    }
}

#[test]
fn psi_fixed_window_sum() {
    let ctx = QContext::real(0.5).unwrap();
    let q = ctx.q();
    let spec = SeriesSpec::from_real(&[2.0, 3.0], &[0.1, 0.15]).unwrap();
    let (x, y) = (c(0.4, 0.0), c(0.7, 0.0));
    let mut oracle = C64::new(0.0, 0.0);
    for n in -40..=40 {
        let mut t = x.powi(n as i32);
        for (&a, &b) in spec.a().iter().zip(spec.b()) {
            t *= naive_poch_ratio(a * y, b * y, n, q);
        }
        oracle += t;
    }
    assert!(rel(psi(&spec, x, y, &ctx).unwrap(), oracle) < 1e-10);
}

#[test]
fn w_series_fixed_window_sum() {
    let ctx = QContext::real(0.5).unwrap();
    let q = ctx.q();
    let a = [1.5, 1.7, 1.9, 2.1];
    let w = WSpec::from_real(&a).unwrap();
    // q^{(r-4)/2} / Π a_j with r = 6
    let z = 0.5 / a.iter().product::<f64>();
    for y in [c(0.9, 0.0), c(1.0 / 0.9, 0.0)] {
        let mut oracle = C64::new(0.0, 0.0);
        for n in -40i64..=40 {
            let mut t = (C64::new(1.0, 0.0) - y * y * q.powi(2 * n as i32)) * z.powi(n as i32);
            for &aj in &a {
                t *= naive_poch_ratio(aj * y, q * y / aj, n, q);
            }
            oracle += t;
        }
        assert!(rel(w_series(&w, y, &ctx).unwrap(), oracle) < 1e-10);
    }
}

#[test]
fn q_gauss_against_long_sum() {
    let ctx = QContext::real(0.5).unwrap();
    let q = ctx.q();
    let (a, b, x) = (c(2.0, 0.0), c(0.7, 0.0), c(0.4, 0.0));
    let oracle: C64 = (0..200)
        .map(|n| {
            naive_poch(a, n, q) * naive_poch(b, n, q) * x.powi(n as i32)
                / (naive_poch(q, n, q) * naive_poch(a * b * x, n, q))
        })
        .sum();
    let pair = q_gauss(a, b, x, &ctx).unwrap();
    assert!(rel(pair.lhs, oracle) < 1e-12);
    assert!(rel(pair.rhs, pair.lhs) < 1e-11);
}

#[test]
fn six_psi_six_direct_sum() {
    let ctx = QContext::real(0.5).unwrap();
    let a = [c(1.5, 0.0), c(1.7, 0.0), c(1.9, 0.0), c(2.1, 0.0)];
    let pair = six_psi_six(&a, c(0.9, 0.0), &ctx).unwrap();
    assert!(rel(pair.lhs, pair.rhs) < 1e-9);
    // zero of θ(y²)
    let at_zero = six_psi_six(&a, ctx.sqrt_q(), &ctx).unwrap();
    assert!(at_zero.lhs.norm() < 1e-9 * at_zero.scale);
}

#[test]
fn kernel_expanded_cubic() {
    let ctx = QContext::real(0.5).unwrap();
    let k = InversionConstants::new(&ctx).unwrap();
    let u = c(0.1, 0.0);
    // u (1 - k1 u)(1 - k2 u) = u - (k1 + k2) u² + k1 k2 u³
    let cubic = u - (k.k1 + k.k2) * u * u + k.k1 * k.k2 * u * u * u;
    let oracle = cubic.sqrt().inv();
    assert!(rel(inversion_kernel(u, &k).unwrap(), oracle) < 1e-13);
    assert!(rel(k.k1 * k.k2, c(1.0, 0.0)) < 1e-12);
    // √u K(u) = 1 + O((k1 + k2) u); here k2 is about 4e5
    let small = c(1e-12, 0.0);
    let bound = 2.0 * (k.k1 + k.k2).norm() * small.norm();
    assert!((small.sqrt() * inversion_kernel(small, &k).unwrap() - 1.0).norm() < bound);
}

#[test]
fn gustafson_value_is_a_product_of_pochhammers() {
    let ctx = QContext::real(0.5).unwrap();
    for (a, b) in [
        (vec![2.0, 3.0], vec![0.1, 0.15]),
        (vec![2.0, 3.0, 1.5], vec![0.1, 0.15, 0.2]),
    ] {
        let spec = SeriesSpec::from_real(&a, &b).unwrap();
        let r = a.len() as i32;
        let mut oracle = ctx.q_inf().powi(-(r - 1) * (r - 2) / 2);
        for &bi in &b {
            for &aj in &a {
                oracle *= qpoch_inf(c(bi / aj, 0.0), &ctx).unwrap();
            }
        }
        assert!(rel(gustafson_value(&spec, &ctx).unwrap(), oracle) < 1e-12);
        let ys: Vec<C64> = [0.8, 1.1, 1.4][..a.len()].iter().map(|&v| c(v, 0.2)).collect();
        let got = gustafson_ratio(&spec, c(0.3, 0.05), &ys, &ctx).unwrap();
        assert!(rel(got, oracle) < 1e-8, "r = {r}: {got} vs {oracle}");
    }
}
