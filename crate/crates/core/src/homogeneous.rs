//! Space homogeneous relaxation: explicit RK4 for `∂_t f = C(f)` and the
//! closed-form BGK solutions used as control variates.

use crate::collision::CollisionOperator;
use crate::error::{Error, Result};
use crate::phase_grid::Distribution;

fn check_shape(op: &dyn CollisionOperator, f: &Distribution) -> Result<()> {
    if f.grid() != op.grid() {
        return Err(Error::Shape("state and collision operator use different grids".into()));
    }
    Ok(())
}

/// One classical RK4 step on raw values. Returns `false` when the result is not finite.
fn rk4_values(values: &mut [f64], dt: f64, op: &dyn CollisionOperator) -> Result<bool> {
    let len = values.len();
    let mut k = vec![0.0; len];
    let mut acc = vec![0.0; len];
    let mut stage = vec![0.0; len];

    op.apply(values, &mut k)?;
    for i in 0..len {
        acc[i] = k[i];
        stage[i] = values[i] + 0.5 * dt * k[i];
    }
    op.apply(&stage, &mut k)?;
    for i in 0..len {
        acc[i] += 2.0 * k[i];
        stage[i] = values[i] + 0.5 * dt * k[i];
    }
    op.apply(&stage, &mut k)?;
    for i in 0..len {
        acc[i] += 2.0 * k[i];
        stage[i] = values[i] + dt * k[i];
    }
    op.apply(&stage, &mut k)?;
    let mut finite = true;
    for i in 0..len {
        values[i] += dt / 6.0 * (acc[i] + k[i]);
        finite &= values[i].is_finite();
    }
    Ok(finite)
}

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step(f: &Distribution, dt: f64, op: &dyn CollisionOperator) -> Result<Distribution> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    check_shape(op, f)?;
    let mut values = f.values().to_vec();
    if !rk4_values(&mut values, dt, op)? {
        return Err(Error::Numerical("non-finite state after RK4 step 1".into()));
    }
    Distribution::from_values(*f.grid(), values)
}

/// Number of steps of size `dt` reaching `t_final`.
pub fn step_count(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::Parameter(format!("need dt > 0 and t_final >= 0 (dt = {dt}, t_final = {t_final})")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(dt) {
        return Err(Error::Parameter(format!("t_final = {t_final} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// States at every step, starting with `f0` at `t = 0`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Distribution>,
}

/// Integrates to `t_final`, handing every state (including the initial one)
/// to `observe(step, time, state)`.
pub fn solve_homogeneous_with(
    f0: &Distribution,
    op: &dyn CollisionOperator,
    dt: f64,
    t_final: f64,
    mut observe: impl FnMut(usize, f64, &Distribution) -> Result<()>,
) -> Result<()> {
    check_shape(op, f0)?;
    let steps = step_count(dt, t_final)?;
    let mut f = f0.clone();
    observe(0, 0.0, &f)?;
    for step in 1..=steps {
        if !rk4_values(f.values_mut(), dt, op)? {
            return Err(Error::Numerical(format!(
                "non-finite state after RK4 step {step} (t = {})",
                step as f64 * dt
            )));
        }
        observe(step, step as f64 * dt, &f)?;
    }
    Ok(())
}

/// Integrates to `t_final` and keeps every state.
pub fn solve_homogeneous(
    f0: &Distribution,
    op: &dyn CollisionOperator,
    dt: f64,
    t_final: f64,
) -> Result<Trajectory> {
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    solve_homogeneous_with(f0, op, dt, t_final, |_, t, f| {
        traj.times.push(t);
        traj.states.push(f.clone());
        Ok(())
    })?;
    Ok(traj)
}

fn check_time(nu: f64, t: f64) -> Result<()> {
    if !(nu > 0.0) || !(t >= 0.0) {
        return Err(Error::Parameter(format!("need nu > 0 and t >= 0 (nu = {nu}, t = {t})")));
    }
    Ok(())
}

fn convex(f0: &[f64], f_inf: &[f64], e: f64) -> Vec<f64> {
    f0.iter().zip(f_inf).map(|(a, b)| e * a + (1.0 - e) * b).collect()
}

/// Exact BGK solution `e^{-νt} f0 + (1 - e^{-νt}) f∞`.
pub fn bgk_exact(f0: &Distribution, f_inf: &Distribution, nu: f64, t: f64) -> Result<Distribution> {
    check_time(nu, t)?;
    f0.ensure_same_grid(f_inf)?;
    Distribution::from_values(*f0.grid(), convex(f0.values(), f_inf.values(), (-nu * t).exp()))
}

/// Expectation of the exact BGK solution for a deterministic `ν`, from the means of `f0` and `f∞`.
pub fn bgk_exact_expectation(
    f0_mean: &Distribution,
    f_inf_mean: &Distribution,
    nu: f64,
    t: f64,
) -> Result<Distribution> {
    bgk_exact(f0_mean, f_inf_mean, nu, t)
}

/// `f0 - f∞` over the fine ensemble used for a random collision frequency.
#[derive(Debug, Clone)]
pub enum BgkDeviations {
    /// The same deviation for every node (deterministic `f0` and `f∞`).
    Shared(Vec<f64>),
    /// One deviation per node.
    PerSample(Vec<Vec<f64>>),
}

/// Expectation of the exact BGK solution when `ν = ν(z)` is random.
///
/// `e^{-ν̄t}⟨f0⟩ + (1 - e^{-ν̄t})⟨f∞⟩ + E_{M_E}[(e^{-ν(z)t} - e^{-ν̄t})(f0 - f∞)]`
/// with `ν̄ = E[ν]` and the last average taken over the nodes in `nus`.
pub fn bgk_random_nu_expectation(
    f0_mean: &Distribution,
    f_inf_mean: &Distribution,
    deviations: &BgkDeviations,
    nus: &[f64],
    nu_bar: f64,
    t: f64,
) -> Result<Distribution> {
    if nus.is_empty() {
        return Err(Error::Parameter("random collision frequency needs at least one node".into()));
    }
    check_time(nu_bar, t)?;
    if nus.iter().any(|&nu| !(nu > 0.0)) {
        return Err(Error::Parameter("collision frequencies must be positive".into()));
    }
    f0_mean.ensure_same_grid(f_inf_mean)?;
    let len = f0_mean.values().len();
    let e_bar = (-nu_bar * t).exp();
    let mut out = convex(f0_mean.values(), f_inf_mean.values(), e_bar);
    let inv = 1.0 / nus.len() as f64;
    let mut corr = vec![0.0; len];
    match deviations {
        BgkDeviations::Shared(d) => {
            if d.len() != len {
                return Err(Error::Shape("deviation length differs from the grid".into()));
            }
            let c: f64 = nus.iter().map(|nu| (-nu * t).exp() - e_bar).sum::<f64>() * inv;
            for (o, x) in corr.iter_mut().zip(d) {
                *o = c * x;
            }
        }
        BgkDeviations::PerSample(ds) => {
            if ds.len() != nus.len() {
                return Err(Error::Shape(format!("{} deviations for {} frequencies", ds.len(), nus.len())));
            }
            for (d, nu) in ds.iter().zip(nus) {
                if d.len() != len {
                    return Err(Error::Shape("deviation length differs from the grid".into()));
                }
                let c = ((-nu * t).exp() - e_bar) * inv;
                for (o, x) in corr.iter_mut().zip(d) {
                    *o += c * x;
                }
            }
        }
    }
    for (o, c) in out.iter_mut().zip(&corr) {
        *o += c;
    }
    Distribution::from_values(*f0_mean.grid(), out)
}
