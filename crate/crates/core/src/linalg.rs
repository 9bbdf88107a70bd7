//! Small dense complex determinants and singular values.

use nalgebra::DMatrix;

use crate::qcore::{C64, ONE, ZERO};

/// Determinant of a square matrix given row by row.
///
/// Sizes up to 3 use cofactor expansion, which is exact in the sense of
/// being a fixed sum of products; larger sizes fall back to LU.
pub fn det(rows: &[Vec<C64>]) -> C64 {
    let n = rows.len();
    debug_assert!(rows.iter().all(|r| r.len() == n));
    match n {
        0 => ONE,
        1 => rows[0][0],
        2 => rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0],
        3 => {
            let m = rows;
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => to_matrix(rows).determinant(),
    }
}

fn to_matrix(rows: &[Vec<C64>]) -> DMatrix<C64> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

/// Singular values in decreasing order.
pub fn singular_values(rows: &[Vec<C64>]) -> Vec<f64> {
    if rows.is_empty() {
        return Vec::new();
    }
    let sv = to_matrix(rows).singular_values();
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// `σ_min / σ_max`, or 0 for an all-zero matrix.
pub fn conditioning_ratio(rows: &[Vec<C64>]) -> f64 {
    let sv = singular_values(rows);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Solves `m v = rhs` for small square systems by Gaussian elimination with
/// partial pivoting. Returns `None` for a numerically singular matrix.
pub fn solve(rows: &[Vec<C64>], rhs: &[C64]) -> Option<Vec<C64>> {
    let n = rows.len();
    let mut a: Vec<Vec<C64>> = rows.to_vec();
    let mut b = rhs.to_vec();
    let scale = rows.iter().flat_map(|r| r.iter().map(|v| v.norm())).fold(0.0, f64::max);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            for j in col..n {
                let t = a[col][j];
                a[i][j] -= f * t;
            }
            let t = b[col];
            b[i] -= f * t;
        }
    }
    let mut x = vec![ZERO; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cofactor_matches_lu() {
        let m = vec![
            vec![c(1.0, 0.5), c(2.0, 0.0), c(0.3, -1.0)],
            vec![c(0.0, 1.0), c(-1.0, 0.2), c(4.0, 0.0)],
            vec![c(2.5, 0.0), c(0.1, 0.1), c(1.0, 1.0)],
        ];
        let lu = to_matrix(&m).determinant();
        assert!((det(&m) - lu).norm() < 1e-12);
    }

    #[test]
    fn rank_deficiency_is_visible() {
        let m = vec![vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(2.0, 0.0), c(4.0, 0.0)]];
        assert!(conditioning_ratio(&m) < 1e-15);
        let id = vec![vec![ONE, ZERO], vec![ZERO, ONE]];
        assert!((conditioning_ratio(&id) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn solves_small_system() {
        let m = vec![vec![c(2.0, 0.0), c(1.0, 1.0)], vec![c(0.0, 1.0), c(3.0, 0.0)]];
        let x = solve(&m, &[c(1.0, 0.0), c(0.0, 2.0)]).unwrap();
        let r0 = m[0][0] * x[0] + m[0][1] * x[1] - c(1.0, 0.0);
        let r1 = m[1][0] * x[0] + m[1][1] * x[1] - c(0.0, 2.0);
        assert!(r0.norm() < 1e-14 && r1.norm() < 1e-14);
    }
}
