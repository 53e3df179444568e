//! Quick invariant suite behind `mscv validate`.
//!
//! Every check runs on small grids in well under a second and compares the
//! solvers against exact identities or closed forms.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collision::{
    micro_macro_residual, moment_defects, q_bgk, q_boltzmann_direct, q_boltzmann_fast, BoltzmannOperator,
    CollisionKernel, CollisionOperator, SpectralMethod, SpectralPlan,
};
use crate::equilibrium::{equilibrium_of, moment_matched_maxwellian};
use crate::error::Result;
use crate::euler1d::{ConservedField, EulerSolver};
use crate::homogeneous::rk4_step;
use crate::kinetic1d::{KineticModel, KineticSolver};
use crate::phase_grid::{compute_moments, Boundary, Distribution, MomentSet, PhaseField, SpatialGrid1D, VelocityGrid};
use crate::quadrature::gauss_legendre_unit;
use crate::uq::{allocate_samples, control_variate_mean, mc_estimate, CostModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = (bool, String);

const CHECKS: [(&str, fn() -> Result<Outcome>); 12] = [
    ("estimator-reductions", estimator_reductions),
    ("gauss-legendre", gauss_legendre_exactness),
    ("sample-allocation", allocation),
    ("maxwellian-moments", maxwellian_matching),
    ("bgk-conservation", bgk_conservation),
    ("spectral-mass", spectral_mass),
    ("fast-vs-direct", fast_converges_to_direct),
    ("micro-macro-identity", micro_macro_identity),
    ("corrected-conservation", moment_correction),
    ("rk4-order", rk4_order),
    ("euler-conservation", euler_conservation),
    ("wall-flux", wall_flux),
];

/// Runs every check; a check that errors is reported as failed.
pub fn run_invariant_suite() -> Vec<Check> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let (passed, detail) = check().unwrap_or_else(|e| (false, e.to_string()));
            Check { name, passed, detail }
        })
        .collect()
}

fn bumps(grid: VelocityGrid) -> Distribution {
    Distribution::from_fn(grid, |a, b| {
        0.1 * ((-(a - 1.5).powi(2) - (b - 1.0).powi(2)).exp() + 0.7 * (-((a + 1.0).powi(2) + (b + 0.5).powi(2)) / 1.5).exp())
    })
}

fn estimator_reductions() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let len = 50;
    let f: Vec<Vec<f64>> = (0..12).map(|_| (0..len).map(|_| rng.gen::<f64>()).collect()).collect();
    let cv: Vec<Vec<f64>> = (0..12).map(|_| (0..len).map(|_| rng.gen::<f64>()).collect()).collect();
    let cv_mean: Vec<f64> = (0..len).map(|_| rng.gen::<f64>()).collect();
    let zero = control_variate_mean(&f, &cv, &cv_mean, &vec![0.0; len])?;
    let one = control_variate_mean(&f, &cv, &cv_mean, &vec![1.0; len])?;
    let diff: Vec<Vec<f64>> = f.iter().zip(&cv).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    let micro_macro: Vec<f64> = mc_estimate(&diff)?.iter().zip(&cv_mean).map(|(g, m)| m + g).collect();
    let ok = zero == mc_estimate(&f)? && one == micro_macro;
    Ok((ok, "λ = 0 and λ = 1 compared bit for bit".into()))
}

fn gauss_legendre_exactness() -> Result<Outcome> {
    let (z, w) = gauss_legendre_unit(4)?;
    let err = (z.iter().zip(&w).map(|(z, w)| w * z.powi(7)).sum::<f64>() - 0.125).abs();
    Ok((err < 1e-15, format!("4-node ∫z⁷ error {err:.1e}")))
}

fn allocation() -> Result<Outcome> {
    let (a, b) = allocate_samples(&CostModel::reference(), 10)?;
    Ok(((a, b) == (1000, 819_200), format!("M_E1 = {a}, M_E2 = {b}")))
}

fn maxwellian_matching() -> Result<Outcome> {
    let grid = VelocityGrid::new(16, 6.0)?;
    let target = MomentSet::from_primitive(0.7, [0.4, -0.3], 1.3);
    let m = compute_moments(&moment_matched_maxwellian(&target, &grid)?);
    let err = (m.rho - target.rho).abs()
        + (m.u[0] - target.u[0]).abs()
        + (m.u[1] - target.u[1]).abs()
        + (m.temperature() - target.temperature()).abs();
    Ok((err < 1e-12, format!("moment error {err:.1e}")))
}

fn bgk_conservation() -> Result<Outcome> {
    let q = q_bgk(&bumps(VelocityGrid::new(16, 6.0)?), 1.3)?;
    let d = moment_defects(&q);
    let worst = d.iter().fold(0.0f64, |a, x| a.max(*x));
    Ok((worst < 1e-12, format!("largest moment {worst:.1e}")))
}

fn spectral_mass() -> Result<Outcome> {
    let grid = VelocityGrid::new(16, 6.0)?;
    let plan = SpectralPlan::new(grid, 8)?;
    let k = CollisionKernel::new(1.0)?;
    let f = bumps(grid);
    let fast = moment_defects(&q_boltzmann_fast(&f, &f, &k, &plan)?)[0];
    let direct = moment_defects(&q_boltzmann_direct(&f, &f, &k, &plan)?)[0];
    let worst = fast.max(direct);
    Ok((worst < 1e-14, format!("mass of Q {worst:.1e}")))
}

fn fast_converges_to_direct() -> Result<Outcome> {
    let grid = VelocityGrid::new(16, 6.0)?;
    let k = CollisionKernel::new(1.0)?;
    let f = bumps(grid);
    let mut errors = Vec::new();
    for n_a in [4, 8, 16] {
        let plan = SpectralPlan::new(grid, n_a)?;
        let d = q_boltzmann_direct(&f, &f, &k, &plan)?;
        errors.push(q_boltzmann_fast(&f, &f, &k, &plan)?.difference(&d)?.l1() / d.l1());
    }
    let ok = errors.windows(2).all(|w| w[1] < w[0]) && errors[2] < 1e-4;
    let shown: Vec<String> = errors.iter().map(|e| format!("{e:.1e}")).collect();
    Ok((ok, format!("relative L¹ for N_a = 4/8/16: {}", shown.join(" / "))))
}

fn micro_macro_identity() -> Result<Outcome> {
    let grid = VelocityGrid::new(16, 6.0)?;
    let plan = SpectralPlan::new(grid, 8)?;
    let f = bumps(grid);
    let r = micro_macro_residual(&f, &equilibrium_of(&f)?, &CollisionKernel::new(1.0)?, &plan, SpectralMethod::Fast)?;
    Ok((r < 1e-10, format!("residual {r:.1e}")))
}

fn moment_correction() -> Result<Outcome> {
    let grid = VelocityGrid::new(16, 6.0)?;
    let op = BoltzmannOperator::new(Arc::new(SpectralPlan::new(grid, 4)?), CollisionKernel::new(1.0)?);
    let f = bumps(grid);
    let mut q = vec![0.0; grid.len()];
    op.apply(f.values(), &mut q)?;
    let d = moment_defects(&Distribution::from_values(grid, q)?);
    let worst = d.iter().fold(0.0f64, |a, x| a.max(*x));
    Ok((worst < 1e-14, format!("largest moment {worst:.1e}")))
}

/// `∂_t f = -f`.
struct Decay(VelocityGrid);

impl CollisionOperator for Decay {
    fn grid(&self) -> &VelocityGrid {
        &self.0
    }

    fn apply(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().zip(f).for_each(|(o, x)| *o = -x);
        Ok(())
    }
}

fn rk4_order() -> Result<Outcome> {
    let grid = VelocityGrid::new(8, 4.0)?;
    let f = Distribution::from_fn(grid, |_, _| 1.0);
    let err = |dt: f64| -> Result<f64> { Ok((rk4_step(&f, dt, &Decay(grid))?.values()[0] - (-dt).exp()).abs()) };
    let ratio = err(0.1)? / err(0.05)?;
    // Local error O(dt⁵): halving dt divides it by 32.
    Ok(((ratio - 32.0).abs() < 1.0, format!("error ratio {ratio:.2}")))
}

fn euler_conservation() -> Result<Outcome> {
    let space = SpatialGrid1D::new(100, 1.0)?;
    let moments: Vec<MomentSet> = (0..100)
        .map(|i| {
            let (rho, t) = if space.center(i) < 0.5 { (1.0, 1.0) } else { (0.125, 0.8) };
            MomentSet::from_primitive(rho, [0.0; 2], t)
        })
        .collect();
    let u0 = ConservedField::from_moments(space, &moments)?;
    let u1 = EulerSolver::new(space, Boundary::Outflow)?.advance(&u0, 0.0, 0.15)?;
    let (a, b) = (u0.totals(), u1.totals());
    // The end pressures differ, so momentum enters through the boundaries; mass and energy do not.
    let drift = (a[0] - b[0]).abs().max((a[3] - b[3]).abs());
    Ok((drift < 1e-10, format!("mass/energy drift {drift:.1e}")))
}

fn wall_flux() -> Result<Outcome> {
    let space = SpatialGrid1D::new(10, 1.0)?;
    let velocity = VelocityGrid::new(16, 8.0)?;
    let boundary = Boundary::DiffusiveWalls { t_left: 2.0, t_right: 1.0 };
    let solver = KineticSolver::new(space, velocity, boundary, 1e-2, &KineticModel::Bgk { b0: 1.0 })?;
    let cell = moment_matched_maxwellian(&MomentSet::from_primitive(1.0, [0.0; 2], 1.0), &velocity)?;
    let values = (0..space.n_x()).flat_map(|_| cell.values().to_vec()).collect();
    let f = PhaseField::from_values(space, velocity, values)?;
    let mut worst = 0.0f64;
    let g = solver.advance(&f, 0.0, 0.02, solver.default_dt(), |d| {
        worst = worst.max(d.wall_mass_flux[0]).max(d.wall_mass_flux[1]);
    })?;
    let drift = (g.totals()[0] - f.totals()[0]).abs();
    let ok = worst <= 1e-12 && drift < 1e-12;
    Ok((ok, format!("largest wall flux {worst:.1e}, mass drift {drift:.1e}")))
}
