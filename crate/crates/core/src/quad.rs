//! Adaptive 15-point Gauss–Legendre quadrature on `[0, 1]` for complex integrands.

use std::sync::OnceLock;

use crate::error::{QError, Result};
use crate::qcore::{C64, ZERO};

const ORDER: usize = 15;

/// Nodes on `[-1, 1]` and weights, from Newton iteration on `P_15`.
fn rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut xs = [0.0; ORDER];
        let mut ws = [0.0; ORDER];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            xs[i] = x;
            ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (xs, ws)
    })
}

/// One 15-point panel over `[a, b]`.
fn panel(f: &mut impl FnMut(f64) -> Result<C64>, a: f64, b: f64) -> Result<C64> {
    let (xs, ws) = rule();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = ZERO;
    for (x, w) in xs.iter().zip(ws) {
        s += f(mid + half * x)? * *w;
    }
    Ok(s * half)
}

/// Integrates `f` over `[0, 1]`, halving panels until a panel and its two
/// halves agree to `tol`.
pub fn integrate_unit(mut f: impl FnMut(f64) -> Result<C64>, tol: f64) -> Result<C64> {
    const MAX_DEPTH: usize = 48;
    const MAX_PANELS: usize = 200_000;
    let mut total = ZERO;
    let mut panels = 0usize;
    // stack of (a, b, coarse estimate, depth)
    let whole = panel(&mut f, 0.0, 1.0)?;
    let mut stack = vec![(0.0, 1.0, whole, 0usize)];
    while let Some((a, b, coarse, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let left = panel(&mut f, a, m)?;
        let right = panel(&mut f, m, b)?;
        panels += 2;
        let fine = left + right;
        let local_tol = tol * (b - a).max(1e-6);
        if (fine - coarse).norm() <= local_tol.max(tol * 1e-3) {
            total += fine;
        } else if depth >= MAX_DEPTH || panels > MAX_PANELS {
            return Err(QError::QuadratureFail(format!(
                "panel [{a}, {b}] still disagrees by {:e} after {panels} panels",
                (fine - coarse).norm()
            )));
        } else {
            stack.push((m, b, right, depth + 1));
            stack.push((a, m, left, depth + 1));
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_polynomials_are_exact() {
        let (xs, ws) = rule();
        assert!((ws.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact for degree 29
        let s: f64 = xs.iter().zip(ws).map(|(x, w)| w * x.powi(28)).sum();
        assert!((s - 2.0 / 29.0).abs() < 1e-14);
    }

    #[test]
    fn integrates_smooth_and_peaked_functions() {
        let v = integrate_unit(|t| Ok(C64::new(t.exp(), 0.0)), 1e-13).unwrap();
        assert!((v.re - (1f64.exp() - 1.0)).abs() < 1e-13);
        // near-singular 1/sqrt(t + 1e-6)
        let v = integrate_unit(|t| Ok(C64::new(1.0 / (t + 1e-6).sqrt(), 0.0)), 1e-12).unwrap();
        let exact = 2.0 * ((1.0f64 + 1e-6).sqrt() - 1e-3);
        assert!((v.re - exact).abs() < 1e-10);
    }
}
