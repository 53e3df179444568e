//! Gauss–Legendre rules for expectations over a uniform random input.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights on `[-1, 1]`, nodes increasing.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Parameter("Gauss-Legendre rule needs at least one node".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, refined by Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes on `[0, 1]` with weights summing to one (expectation of a uniform variable).
pub fn gauss_legendre_unit(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_legendre(n)?;
    Ok((x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_two_and_three_point_rules() {
        let (x, w) = gauss_legendre(2).unwrap();
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15 && (x[0] + x[1]).abs() < 1e-16);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3).unwrap();
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15 && x[1] == 0.0);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15 && (w[0] - 5.0 / 9.0).abs() < 1e-15);
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn exact_for_degree_two_n_minus_one() {
        for n in [1usize, 4, 8, 16, 32] {
            let (x, w) = gauss_legendre_unit(n).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..(2 * n) as i32 {
                let q: f64 = x.iter().zip(&w).map(|(t, v)| v * t.powi(deg)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn smooth_integrand_converges() {
        let (x, w) = gauss_legendre_unit(16).unwrap();
        let q: f64 = x.iter().zip(&w).map(|(t, v)| v * (-1.2 * t).exp()).sum();
        let exact = (1.0 - (-1.2f64).exp()) / 1.2;
        assert!((q - exact).abs() < 1e-15);
    }
}
