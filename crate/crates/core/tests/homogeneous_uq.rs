use std::sync::Arc;

use proptest::prelude::*;

use mscv_core::collision::{BgkFrequency, BgkOperator, BoltzmannOperator, CollisionKernel, SpectralPlan};
use mscv_core::equilibrium::equilibrium_of;
use mscv_core::experiments::setup::two_bumps;
use mscv_core::homogeneous::{bgk_exact, solve_homogeneous};
use mscv_core::phase_grid::{compute_moments, MomentSet, VelocityGrid};
use mscv_core::uq::{control_variate_mean, mc_estimate, mscv_estimate, LambdaMode};

fn bgk_error(dt: f64) -> f64 {
    let grid = VelocityGrid::new(16, 8.0).unwrap();
    let f0 = two_bumps(grid, 0.2, 0.3);
    let op = BgkOperator { grid, frequency: BgkFrequency::Constant(2.0) };
    let traj = solve_homogeneous(&f0, &op, dt, 1.0).unwrap();
    let exact = bgk_exact(&f0, &equilibrium_of(&f0).unwrap(), 2.0, 1.0).unwrap();
    traj.states.last().unwrap().difference(&exact).unwrap().l1() / exact.l1()
}

#[test]
fn time_stepping_matches_the_closed_form_bgk_relaxation() {
    let (coarse, fine) = (bgk_error(0.1), bgk_error(0.05));
    assert!(fine < 1e-6, "{fine:e}");
    // Fourth order: halving dt divides the global error by about 16.
    let ratio = coarse / fine;
    assert!((ratio - 16.0).abs() < 2.0, "{ratio}");
}

fn drift(a: &MomentSet, b: &MomentSet) -> f64 {
    (a.rho - b.rho).abs().max((a.u[0] - b.u[0]).abs()).max((a.u[1] - b.u[1]).abs()).max((a.energy - b.energy).abs())
}

fn samples(rows: &[Vec<f64>], scale: f64, shift: f64) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(|x| scale * x + shift).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn corrected_boltzmann_flow_conserves_moments(z in 0.0f64..1.0, b0 in 0.5f64..2.0) {
        let grid = VelocityGrid::new(16, 8.0).unwrap();
        let op = BoltzmannOperator::new(Arc::new(SpectralPlan::new(grid, 4).unwrap()), CollisionKernel::new(b0).unwrap());
        let f0 = two_bumps(grid, 0.2, z);
        let traj = solve_homogeneous(&f0, &op, 0.5, 2.0).unwrap();
        let (a, b) = (compute_moments(&f0), compute_moments(traj.states.last().unwrap()));
        prop_assert!(drift(&a, &b) < 1e-13 * a.energy.max(a.rho), "{a:?} {b:?}");
    }
}

proptest! {
    #[test]
    fn estimate_is_affine_in_lambda(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..12),
        cv_rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 12),
        cv_mean in prop::collection::vec(-1.0f64..1.0, 3),
        lambda in -3.0f64..3.0,
    ) {
        let cv = &cv_rows[..rows.len()];
        let est = control_variate_mean(&rows, cv, &cv_mean, &[lambda; 3]).unwrap();
        let (mf, mc) = (mc_estimate(&rows).unwrap(), mc_estimate(cv).unwrap());
        for i in 0..3 {
            let expected = mf[i] - lambda * (mc[i] - cv_mean[i]);
            prop_assert!((est[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_linear_control_variate_recovers_the_mean(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 3..20),
        scale in prop_oneof![-4.0f64..-0.25, 0.25f64..4.0],
        shift in -2.0f64..2.0,
        true_mean in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        // Every column must vary, otherwise λ* is guarded to zero.
        prop_assume!((0..4).all(|i| rows.iter().any(|r| (r[i] - rows[0][i]).abs() > 1e-3)));
        let cv = samples(&rows, scale, shift);
        let cv_mean: Vec<f64> = true_mean.iter().map(|m| scale * m + shift).collect();
        let r = mscv_estimate(&rows, &cv, &cv_mean, LambdaMode::Optimal, None, None).unwrap();
        for (l, m) in r.lambda.unwrap().iter().zip(&r.mean) {
            prop_assert!((l * scale - 1.0).abs() < 1e-9);
            prop_assert!(m.is_finite());
        }
        for (m, t) in r.mean.iter().zip(&true_mean) {
            prop_assert!((m - t).abs() < 1e-9, "{m} vs {t}");
        }
    }
}
