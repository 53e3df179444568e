//! Maxwellian equilibria, discrete moment matching and the micro-macro split.

use nalgebra::{Matrix4, Vector4};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::phase_grid::{raw_moments, Distribution, MomentSet, VelocityGrid};

/// Relative moment residual reached by [`match_maxwellian`].
pub const MATCH_TOLERANCE: f64 = 1e-12;
const MAX_NEWTON_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellianParams {
    pub rho: f64,
    pub u: [f64; 2],
    pub temperature: f64,
}

impl MaxwellianParams {
    /// Parameters with the same analytic moments as `m`.
    pub fn from_moments(m: &MomentSet) -> Self {
        Self { rho: m.rho, u: m.u, temperature: m.temperature() }
    }
}

fn axis_factors(grid: &VelocityGrid, mean: f64, temperature: f64) -> Vec<f64> {
    let inv = 1.0 / (2.0 * temperature);
    grid.nodes().iter().map(|v| (-(v - mean) * (v - mean) * inv).exp()).collect()
}

fn fill_maxwellian(grid: &VelocityGrid, p: &MaxwellianParams, out: &mut [f64]) {
    let n = grid.n_per_dim();
    let a = axis_factors(grid, p.u[0], p.temperature);
    let b = axis_factors(grid, p.u[1], p.temperature);
    let c = p.rho / (2.0 * PI * p.temperature);
    for i1 in 0..n {
        let ca = c * a[i1];
        for i2 in 0..n {
            out[i1 * n + i2] = ca * b[i2];
        }
    }
}

/// `ρ/(2πT) exp(-|v-u|²/(2T))` sampled on the grid nodes.
pub fn maxwellian(params: &MaxwellianParams, grid: &VelocityGrid) -> Result<Distribution> {
    if params.rho == 0.0 {
        return Ok(Distribution::zeros(*grid));
    }
    if !(params.temperature > 0.0) || !params.temperature.is_finite() {
        return Err(Error::Parameter(format!(
            "Maxwellian temperature must be positive, got {}",
            params.temperature
        )));
    }
    let mut values = vec![0.0; grid.len()];
    fill_maxwellian(grid, params, &mut values);
    Distribution::from_values(*grid, values)
}

fn scaled_residual(target: &[f64; 4], got: &[f64; 4], rho: f64, temperature: f64) -> f64 {
    let mom_scale = rho * temperature.sqrt().max(1e-300);
    let r = [
        (got[0] - target[0]) / rho,
        (got[1] - target[1]) / mom_scale,
        (got[2] - target[2]) / mom_scale,
        (got[3] - target[3]) / target[3],
    ];
    r.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Maxwellian parameters whose *discrete* moments on `grid` equal `m`.
///
/// Newton iteration on `(ρ, u, T)` started from the analytic parameters.
pub fn match_maxwellian(m: &MomentSet, grid: &VelocityGrid) -> Result<MaxwellianParams> {
    let t0 = m.temperature();
    if !(m.rho > 0.0) || !(t0 > 0.0) || !m.energy.is_finite() {
        return Err(Error::Numerical(format!(
            "inadmissible moments for an equilibrium: rho = {}, T = {}",
            m.rho, t0
        )));
    }
    let target = m.conserved();
    let mut p = MaxwellianParams::from_moments(m);
    let n = grid.n_per_dim();
    let nodes = grid.nodes();
    let dv = grid.cell_volume();
    let mut buf = vec![0.0; grid.len()];
    let mut residual = f64::INFINITY;

    for _ in 0..MAX_NEWTON_ITERATIONS {
        fill_maxwellian(grid, &p, &mut buf);
        let got = raw_moments(grid, &buf);
        residual = scaled_residual(&target, &got, m.rho, p.temperature);
        if residual <= MATCH_TOLERANCE {
            return Ok(p);
        }

        // Jacobian of the discrete moments with respect to (ρ, u1, u2, T).
        let mut jac = Matrix4::<f64>::zeros();
        let t = p.temperature;
        for i1 in 0..n {
            let v1 = nodes[i1];
            for i2 in 0..n {
                let v2 = nodes[i2];
                let f = buf[i1 * n + i2];
                if f == 0.0 {
                    continue;
                }
                let (c1, c2) = (v1 - p.u[0], v2 - p.u[1]);
                let d = [
                    f / p.rho,
                    f * c1 / t,
                    f * c2 / t,
                    f * ((c1 * c1 + c2 * c2) / (2.0 * t * t) - 1.0 / t),
                ];
                let phi = [1.0, v1, v2, 0.5 * (v1 * v1 + v2 * v2)];
                for a in 0..4 {
                    for b in 0..4 {
                        jac[(a, b)] += phi[a] * d[b];
                    }
                }
            }
        }
        jac *= dv;
        let rhs = Vector4::new(
            target[0] - got[0],
            target[1] - got[1],
            target[2] - got[2],
            target[3] - got[3],
        );
        let step = jac.lu().solve(&rhs).ok_or_else(|| {
            Error::Numerical("singular Jacobian while matching Maxwellian moments".into())
        })?;

        // Keep the density and temperature positive.
        let mut alpha = 1.0;
        while (p.rho + alpha * step[0] <= 0.0 || t + alpha * step[3] <= 0.0) && alpha > 1e-6 {
            alpha *= 0.5;
        }
        p.rho += alpha * step[0];
        p.u[0] += alpha * step[1];
        p.u[1] += alpha * step[2];
        p.temperature += alpha * step[3];
    }
    Err(Error::Numerical(format!(
        "moment matching did not converge in {MAX_NEWTON_ITERATIONS} iterations (residual {residual:.3e})"
    )))
}

/// Discrete Gaussian whose grid moments equal `m` to [`MATCH_TOLERANCE`].
pub fn moment_matched_maxwellian(m: &MomentSet, grid: &VelocityGrid) -> Result<Distribution> {
    let p = match_maxwellian(m, grid)?;
    maxwellian(&p, grid)
}

/// Writes the moment-matched Maxwellian of `values` into `out`; returns the moments.
pub(crate) fn matched_equilibrium_into(
    grid: &VelocityGrid,
    values: &[f64],
    out: &mut [f64],
) -> Result<MomentSet> {
    let m = MomentSet::from_conserved(raw_moments(grid, values));
    let p = match_maxwellian(&m, grid)?;
    fill_maxwellian(grid, &p, out);
    Ok(m)
}

/// Equilibrium of `f`, i.e. the moment-matched Maxwellian of its own moments.
pub fn equilibrium_of(f: &Distribution) -> Result<Distribution> {
    let mut out = vec![0.0; f.grid().len()];
    matched_equilibrium_into(f.grid(), f.values(), &mut out)?;
    Distribution::from_values(*f.grid(), out)
}

/// `g = f - f_inf`, checking that `g` carries no mass, momentum or energy.
pub fn micro_macro_split(f: &Distribution, f_inf: &Distribution) -> Result<Distribution> {
    let g = f.difference(f_inf)?;
    let mg = raw_moments(g.grid(), g.values());
    let mf = raw_moments(f.grid(), f.values());
    let scale = mf[0].abs().max(mf[3].abs()).max(1.0);
    let worst = mg.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if worst > 1e-10 * scale {
        return Err(Error::Consistency(format!(
            "non-equilibrium part carries moments (max residual {worst:.3e})"
        )));
    }
    Ok(g)
}
