//! Initial data, kernels and boundaries of the five benchmark problems as
//! functions of the random input `z`.

use std::f64::consts::PI;

use crate::equilibrium::moment_matched_maxwellian;
use crate::error::Result;
use crate::phase_grid::{Boundary, Distribution, MomentSet, PhaseField, SpatialGrid1D, VelocityGrid};

use super::config::ExperimentConfig;

pub const BUMP_RHO0: f64 = 0.125;
pub const BUMP_SIGMA: f64 = 0.5;
/// Initial temperature of the sudden heating problem and of its right wall.
pub const HEATING_T0: f64 = 1.0;
pub const SOD_LEFT: (f64, f64) = (1.0, 1.0);
pub const SOD_RIGHT: (f64, f64) = (0.125, 0.8);

/// Two Gaussian bumps centred at `±c (1, 1)`, shifted by `s z`.
pub fn two_bumps(grid: VelocityGrid, s: f64, z: f64) -> Distribution {
    let c1 = 2.0 + s * z;
    let c2 = 1.0 + s * z;
    Distribution::from_fn(grid, |v1, v2| {
        let d1 = (v1 - c1).powi(2) + (v2 - c1).powi(2);
        let d2 = (v1 + c2).powi(2) + (v2 + c2).powi(2);
        BUMP_RHO0 / (2.0 * PI) * ((-d1 / BUMP_SIGMA).exp() + (-d2 / BUMP_SIGMA).exp())
    })
}

/// `|v|² exp(-|v|²/2) / (2π²)`.
pub fn ring(grid: VelocityGrid) -> Distribution {
    Distribution::from_fn(grid, |v1, v2| {
        let r2 = v1 * v1 + v2 * v2;
        r2 * (-0.5 * r2).exp() / (2.0 * PI * PI)
    })
}

/// Initial datum of the space homogeneous tests.
pub fn homogeneous_initial(cfg: &ExperimentConfig, grid: VelocityGrid, z: f64) -> Distribution {
    match cfg.test {
        1 => two_bumps(grid, cfg.s, z),
        _ => ring(grid),
    }
}

/// Collision kernel magnitude `b0(z)`.
pub fn kernel_b0(cfg: &ExperimentConfig, z: f64) -> f64 {
    match cfg.test {
        2 | 4 => 1.0 + cfg.s * z,
        _ => 1.0,
    }
}

/// `E[b0(z)]` for `z` uniform on `[0, 1]`.
pub fn mean_kernel_b0(cfg: &ExperimentConfig) -> f64 {
    match cfg.test {
        2 | 4 => 1.0 + 0.5 * cfg.s,
        _ => 1.0,
    }
}

/// Whether the initial datum depends on `z`.
pub fn random_initial_datum(cfg: &ExperimentConfig) -> bool {
    matches!(cfg.test, 1 | 3)
}

pub fn boundary(cfg: &ExperimentConfig, z: f64) -> Boundary {
    match cfg.test {
        5 => Boundary::DiffusiveWalls { t_left: 2.0 * (HEATING_T0 + cfg.s * z), t_right: HEATING_T0 },
        _ => Boundary::Outflow,
    }
}

/// Initial moments per cell of the space dependent tests.
pub fn field_moments(cfg: &ExperimentConfig, space: &SpatialGrid1D, z: f64) -> Vec<MomentSet> {
    let half = 0.5 * space.length();
    (0..space.n_x())
        .map(|i| match cfg.test {
            5 => MomentSet::from_primitive(1.0, [0.0; 2], HEATING_T0),
            _ => {
                let (rho, t) = if space.center(i) < half { SOD_LEFT } else { SOD_RIGHT };
                let t = if cfg.test == 3 { t + cfg.s * z } else { t };
                MomentSet::from_primitive(rho, [0.0; 2], t)
            }
        })
        .collect()
}

/// Equilibrium initial field, moment matched per cell.
pub fn field_initial(cfg: &ExperimentConfig, space: SpatialGrid1D, velocity: VelocityGrid, z: f64) -> Result<PhaseField> {
    let mut values = Vec::with_capacity(space.n_x() * velocity.len());
    for m in field_moments(cfg, &space, z) {
        let cell = moment_matched_maxwellian(&m, &velocity)?;
        values.extend_from_slice(cell.values());
    }
    PhaseField::from_values(space, velocity, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{build_test, Scale};
    use crate::phase_grid::compute_moments;

    #[test]
    fn bump_mass_and_centre() {
        let g = VelocityGrid::new(64, 8.0).unwrap();
        for z in [0.0, 0.5, 1.0] {
            let m = compute_moments(&two_bumps(g, 0.2, z));
            // Each bump carries ρ0 σ / 2.
            assert!((m.rho - BUMP_RHO0 * BUMP_SIGMA).abs() < 1e-10);
            let c = 0.5 * ((2.0 + 0.2 * z) - (1.0 + 0.2 * z));
            assert!((m.u[0] - c).abs() < 1e-10 && (m.u[1] - c).abs() < 1e-10);
        }
    }

    #[test]
    fn ring_moments() {
        let g = VelocityGrid::new(64, 10.0).unwrap();
        let m = compute_moments(&ring(g));
        // ρ = 2/π, ⟨|v|²⟩ = 4 so T = 2.
        assert!((m.rho - 2.0 / PI).abs() < 1e-9);
        assert!((m.temperature() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn random_parameters() {
        let t2 = build_test(2, Scale::Desk).unwrap();
        assert!((kernel_b0(&t2, 0.5) - 1.1).abs() < 1e-15);
        let t5 = build_test(5, Scale::Desk).unwrap();
        assert_eq!(boundary(&t5, 0.5), Boundary::DiffusiveWalls { t_left: 2.2, t_right: 1.0 });
        let t3 = build_test(3, Scale::Desk).unwrap();
        let space = SpatialGrid1D::new(10, 1.0).unwrap();
        let m = field_moments(&t3, &space, 1.0);
        assert!((m[0].temperature() - 1.25).abs() < 1e-14);
        assert!((m[9].temperature() - 1.05).abs() < 1e-14);
        assert_eq!(m[9].rho, 0.125);
    }
}
