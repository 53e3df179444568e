//! Fifth-order WENO reconstruction (Jiang–Shu weights).

use crate::error::{Error, Result};

const EPS: f64 = 1e-6;

/// Value at the right face of `c` from the cell averages `a, b, c, d, e`
/// (cells `i-2..=i+2`), upwinded from the left.
#[inline]
pub fn reconstruct(a: f64, b: f64, c: f64, d: f64, e: f64) -> f64 {
    let q0 = (2.0 * a - 7.0 * b + 11.0 * c) / 6.0;
    let q1 = (-b + 5.0 * c + 2.0 * d) / 6.0;
    let q2 = (2.0 * c + 5.0 * d - e) / 6.0;
    let s0 = 13.0 / 12.0 * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2);
    let s1 = 13.0 / 12.0 * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2);
    let s2 = 13.0 / 12.0 * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2);
    let a0 = 0.1 / ((EPS + s0) * (EPS + s0));
    let a1 = 0.6 / ((EPS + s1) * (EPS + s1));
    let a2 = 0.3 / ((EPS + s2) * (EPS + s2));
    (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)
}

/// Upwind WENO5 approximation of `∂_x u` on a periodic grid.
///
/// `wind > 0` reconstructs from the left, `wind < 0` from the right, and
/// `wind == 0` returns zeros.
pub fn weno5_derivative(values: &[f64], wind: f64, dx: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 7 {
        return Err(Error::Parameter(format!("WENO5 needs at least 7 cells, got {n}")));
    }
    if wind == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let at = |i: isize| values[i.rem_euclid(n as isize) as usize];
    // Face value at i + 1/2.
    let face: Vec<f64> = (0..n as isize)
        .map(|i| {
            if wind > 0.0 {
                reconstruct(at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2))
            } else {
                reconstruct(at(i + 3), at(i + 2), at(i + 1), at(i), at(i - 1))
            }
        })
        .collect();
    Ok((0..n).map(|i| (face[i] - face[(i + n - 1) % n]) / dx).collect())
}
