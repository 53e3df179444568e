//! Kinetic equation `∂_t f + v_x ∂_x f = (1/ε) C(f)` on `[0, L] × [-v_max, v_max]^2`.
//!
//! Transport is upwind WENO5 per velocity node, collisions are local in
//! space, and both are advanced together by SSP-RK2.

use std::sync::Arc;

use rayon::prelude::*;

use crate::collision::{BgkFrequency, BgkOperator, BoltzmannOperator, CollisionKernel, CollisionOperator, SpectralPlan};
use crate::equilibrium::{maxwellian, MaxwellianParams};
use crate::error::{Error, Result};
use crate::euler1d::half_fluxes;
use crate::phase_grid::{Boundary, PhaseField, SpatialGrid1D, VelocityGrid};
use crate::weno::reconstruct;

const GHOSTS: usize = 3;

/// Collision model of the kinetic solver.
#[derive(Debug, Clone)]
pub enum KineticModel {
    Boltzmann { plan: Arc<SpectralPlan>, kernel: CollisionKernel },
    /// BGK with frequency `b0 ρ(x, t)`.
    Bgk { b0: f64 },
}

impl KineticModel {
    fn operator(&self, grid: VelocityGrid) -> Box<dyn CollisionOperator> {
        match self {
            KineticModel::Boltzmann { plan, kernel } => Box::new(BoltzmannOperator::new(plan.clone(), *kernel)),
            KineticModel::Bgk { b0 } => Box::new(BgkOperator { grid, frequency: BgkFrequency::DensityScaled(*b0) }),
        }
    }
}

/// Per-step record of the net mass flux through each wall.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Largest `|Σ v_x f Δv²|` at the left and right walls over the RK stages.
    pub wall_mass_flux: [f64; 2],
}

/// Wall state built for one boundary: re-emission density and Maxwellian.
struct WallState {
    rho_w: f64,
    maxwellian: Vec<f64>,
}

/// Re-emitted density `ρ_w` so that the wall absorbs no mass.
///
/// `normal` is the inward normal (`+1` on the left wall, `-1` on the right).
/// `f` supplies the outgoing traces; the incoming half is `ρ_w M_{T_w}`.
pub fn diffusive_wall(f: &[f64], t_wall: f64, grid: &VelocityGrid, normal: f64) -> Result<(f64, Vec<f64>)> {
    if !(t_wall > 0.0) {
        return Err(Error::Parameter(format!("wall temperature must be positive, got {t_wall}")));
    }
    let mw = maxwellian(&MaxwellianParams { rho: 1.0, u: [0.0, 0.0], temperature: t_wall }, grid)?;
    let (out, inc) = half_fluxes(grid, f, mw.values(), normal);
    if inc <= 0.0 {
        if out > 0.0 {
            return Err(Error::Numerical("outgoing flux cannot be re-emitted: degenerate wall state".into()));
        }
        return Ok((0.0, mw.into_values()));
    }
    Ok((out / inc, mw.into_values()))
}

/// Kinetic solver for one realization of the parameters.
pub struct KineticSolver {
    pub space: SpatialGrid1D,
    pub velocity: VelocityGrid,
    pub boundary: Boundary,
    pub eps: f64,
    operator: Box<dyn CollisionOperator>,
}

impl std::fmt::Debug for KineticSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KineticSolver")
            .field("space", &self.space)
            .field("velocity", &self.velocity)
            .field("boundary", &self.boundary)
            .field("eps", &self.eps)
            .finish()
    }
}

impl KineticSolver {
    pub fn new(
        space: SpatialGrid1D,
        velocity: VelocityGrid,
        boundary: Boundary,
        eps: f64,
        model: &KineticModel,
    ) -> Result<Self> {
        if space.n_x() < 7 {
            return Err(Error::Parameter(format!("WENO5 needs at least 7 cells, got {}", space.n_x())));
        }
        if !(eps > 0.0) {
            return Err(Error::Parameter(format!("Knudsen number must be positive, got {eps}")));
        }
        if let KineticModel::Boltzmann { plan, .. } = model {
            if *plan.grid() != velocity {
                return Err(Error::Shape("spectral plan and velocity grid differ".into()));
            }
        }
        if let Boundary::DiffusiveWalls { t_left, t_right } = boundary {
            if !(t_left > 0.0 && t_right > 0.0) {
                return Err(Error::Parameter("wall temperatures must be positive".into()));
            }
        }
        Ok(Self { space, velocity, boundary, eps, operator: model.operator(velocity) })
    }

    /// `min(Δx / (2 v_max), ε)`.
    pub fn default_dt(&self) -> f64 {
        (self.space.spacing() / (2.0 * self.velocity.v_max())).min(self.eps)
    }

    fn check_cfl(&self, dt: f64) {
        let limit = self.space.spacing() / (2.0 * self.velocity.v_max());
        if dt > limit * (1.0 + 1e-12) {
            log::warn!("time step {dt} exceeds the transport limit {limit}");
        }
    }

    fn wall(&self, f: &[f64], idx_cell: usize, t_wall: f64, normal: f64) -> Result<WallState> {
        let nv = self.velocity.len();
        // Outgoing traces at the wall face, reconstructed from the interior.
        let mut traces = vec![0.0; nv];
        let n = self.space.n_x();
        let at = |i: isize, q: usize| -> f64 {
            let i = i.clamp(0, n as isize - 1) as usize;
            f[i * nv + q]
        };
        for (q, t) in traces.iter_mut().enumerate() {
            let vx = self.velocity.velocity(q)[0];
            if vx * normal >= 0.0 {
                continue;
            }
            *t = if normal > 0.0 {
                reconstruct(at(2, q), at(1, q), at(0, q), at(-1, q), at(-2, q))
            } else {
                let l = idx_cell as isize;
                reconstruct(at(l - 2, q), at(l - 1, q), at(l, q), at(l + 1, q), at(l + 2, q))
            };
        }
        let (rho_w, maxwellian) = diffusive_wall(&traces, t_wall, &self.velocity, normal)?;
        Ok(WallState { rho_w, maxwellian })
    }

    /// `-v_x ∂_x f` for every cell and velocity, plus the net wall mass fluxes.
    fn transport(&self, f: &[f64], out: &mut [f64]) -> Result<[f64; 2]> {
        let n = self.space.n_x();
        let nv = self.velocity.len();
        let dx = self.space.spacing();
        let dv = self.velocity.cell_volume();
        let walls = match self.boundary {
            Boundary::DiffusiveWalls { t_left, t_right } => Some((
                self.wall(f, 0, t_left, 1.0)?,
                self.wall(f, n - 1, t_right, -1.0)?,
            )),
            _ => None,
        };
        let mut net = [0.0; 2];
        let mut col = vec![0.0; n + 2 * GHOSTS];
        let mut faces = vec![0.0; n + 1];
        for q in 0..nv {
            let vx = self.velocity.velocity(q)[0];
            for i in 0..n {
                col[GHOSTS + i] = f[i * nv + q];
            }
            for g in 0..GHOSTS {
                let (lo, hi) = match (&self.boundary, &walls) {
                    (Boundary::Periodic, _) => (col[GHOSTS + n - GHOSTS + g], col[GHOSTS + g]),
                    (Boundary::DiffusiveWalls { .. }, Some((wl, wr))) => {
                        let lo = if vx > 0.0 { wl.rho_w * wl.maxwellian[q] } else { col[GHOSTS] };
                        let hi = if vx < 0.0 { wr.rho_w * wr.maxwellian[q] } else { col[GHOSTS + n - 1] };
                        (lo, hi)
                    }
                    _ => (col[GHOSTS], col[GHOSTS + n - 1]),
                };
                col[g] = lo;
                col[GHOSTS + n + g] = hi;
            }
            for (j, face) in faces.iter_mut().enumerate() {
                let l = j + GHOSTS - 1;
                let value = if vx > 0.0 {
                    reconstruct(col[l - 2], col[l - 1], col[l], col[l + 1], col[l + 2])
                } else {
                    reconstruct(col[l + 3], col[l + 2], col[l + 1], col[l], col[l - 1])
                };
                *face = vx * value;
            }
            if let Some((wl, wr)) = &walls {
                if vx > 0.0 {
                    faces[0] = vx * wl.rho_w * wl.maxwellian[q];
                } else if vx < 0.0 {
                    faces[n] = vx * wr.rho_w * wr.maxwellian[q];
                }
                net[0] += faces[0] * dv;
                net[1] += faces[n] * dv;
            }
            for i in 0..n {
                out[i * nv + q] = -(faces[i + 1] - faces[i]) / dx;
            }
        }
        Ok([net[0].abs(), net[1].abs()])
    }

    /// Adds `(1/ε) C(f)` to `out`, cell by cell.
    fn add_collisions(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        let nv = self.velocity.len();
        let inv = 1.0 / self.eps;
        out.par_chunks_mut(nv).zip(f.par_chunks(nv)).try_for_each(|(o, cell)| {
            let mut q = vec![0.0; nv];
            self.operator.apply(cell, &mut q)?;
            for (a, b) in o.iter_mut().zip(&q) {
                *a += inv * b;
            }
            Ok(())
        })
    }

    fn rhs(&self, f: &[f64], out: &mut [f64], collide: bool) -> Result<[f64; 2]> {
        let net = self.transport(f, out)?;
        if collide {
            self.add_collisions(f, out)?;
        }
        Ok(net)
    }

    fn rk2(&self, field: &PhaseField, dt: f64, collide: bool) -> Result<(PhaseField, StepDiagnostics)> {
        if *field.space() != self.space || *field.velocity() != self.velocity {
            return Err(Error::Shape("field and solver use different grids".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
        }
        self.check_cfl(dt);
        let f0 = field.values();
        let len = f0.len();
        let mut k = vec![0.0; len];
        let n0 = self.rhs(f0, &mut k, collide)?;
        let f1: Vec<f64> = f0.iter().zip(&k).map(|(a, b)| a + dt * b).collect();
        let n1 = self.rhs(&f1, &mut k, collide)?;
        let mut f2 = vec![0.0; len];
        let mut finite = true;
        for i in 0..len {
            f2[i] = 0.5 * (f0[i] + f1[i] + dt * k[i]);
            finite &= f2[i].is_finite();
        }
        if !finite {
            return Err(Error::Numerical("non-finite kinetic state after RK2 step".into()));
        }
        let diag = StepDiagnostics { wall_mass_flux: [n0[0].max(n1[0]), n0[1].max(n1[1])] };
        Ok((PhaseField::from_values(self.space, self.velocity, f2)?, diag))
    }

    /// One SSP-RK2 step of transport and collisions.
    pub fn step(&self, field: &PhaseField, dt: f64) -> Result<(PhaseField, StepDiagnostics)> {
        self.rk2(field, dt, true)
    }

    /// One SSP-RK2 step of pure transport.
    pub fn transport_step(&self, field: &PhaseField, dt: f64) -> Result<PhaseField> {
        Ok(self.rk2(field, dt, false)?.0)
    }

    /// Advances from `t0` to `t1` with steps of at most `dt_max`, landing on
    /// `t1`; `observe` sees every step's diagnostics.
    pub fn advance(
        &self,
        field: &PhaseField,
        t0: f64,
        t1: f64,
        dt_max: f64,
        mut observe: impl FnMut(&StepDiagnostics),
    ) -> Result<PhaseField> {
        let mut f = field.clone();
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(f);
        }
        let steps = (span / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        for s in 0..steps {
            let (next, diag) = self.step(&f, dt).map_err(|e| match e {
                Error::Numerical(msg) => {
                    Error::Numerical(format!("{msg} (t = {:.6})", t0 + (s + 1) as f64 * dt))
                }
                other => other,
            })?;
            observe(&diag);
            f = next;
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::moment_matched_maxwellian;
    use crate::phase_grid::MomentSet;

    fn grids(n_x: usize) -> (SpatialGrid1D, VelocityGrid) {
        (SpatialGrid1D::new(n_x, 1.0).unwrap(), VelocityGrid::new(8, 5.0).unwrap())
    }

    fn global_maxwellian(space: SpatialGrid1D, vg: VelocityGrid) -> PhaseField {
        let m = moment_matched_maxwellian(&MomentSet::from_primitive(1.0, [0.0; 2], 1.0), &vg).unwrap();
        PhaseField::from_values(space, vg, m.values().repeat(space.n_x())).unwrap()
    }

    #[test]
    fn global_equilibrium_is_stationary() {
        // Resolved enough that the matched and analytic Maxwellians agree at the walls.
        let space = SpatialGrid1D::new(12, 1.0).unwrap();
        let vg = VelocityGrid::new(16, 8.0).unwrap();
        let f = global_maxwellian(space, vg);
        for bc in [Boundary::Periodic, Boundary::Outflow, Boundary::DiffusiveWalls { t_left: 1.0, t_right: 1.0 }] {
            let solver = KineticSolver::new(space, vg, bc, 1e-2, &KineticModel::Bgk { b0: 1.0 }).unwrap();
            let out = solver.advance(&f, 0.0, 0.05, solver.default_dt(), |_| {}).unwrap();
            let diff = out.values().iter().zip(f.values()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(diff < 1e-8, "{bc:?}: {diff}");
        }
    }

    #[test]
    fn zero_velocity_plane_is_untouched() {
        let space = SpatialGrid1D::new(10, 1.0).unwrap();
        // Odd node count per dimension is not allowed by the spectral grid, but
        // BGK does not care; use n = 3 to get v_x = 0.
        let vg = VelocityGrid::new(3, 3.0).unwrap();
        let mut f = PhaseField::zeros(space, vg);
        for i in 0..10 {
            for q in 0..vg.len() {
                f.cell_mut(i)[q] = 1.0 + (i * 7 + q) as f64 % 5.0;
            }
        }
        let solver = KineticSolver::new(space, vg, Boundary::Periodic, 1.0, &KineticModel::Bgk { b0: 1.0 }).unwrap();
        let out = solver.transport_step(&f, 0.01).unwrap();
        for i in 0..10 {
            for q in 0..vg.len() {
                if vg.velocity(q)[0] == 0.0 {
                    assert_eq!(out.cell(i)[q], f.cell(i)[q]);
                }
            }
        }
    }

    #[test]
    fn wall_density_for_a_wall_maxwellian() {
        let vg = VelocityGrid::new(16, 8.0).unwrap();
        let mw = maxwellian(&MaxwellianParams { rho: 0.7, u: [0.0; 2], temperature: 1.5 }, &vg).unwrap();
        for normal in [1.0, -1.0] {
            let (rho_w, _) = diffusive_wall(mw.values(), 1.5, &vg, normal).unwrap();
            assert!((rho_w - 0.7).abs() < 1e-10);
        }
        assert!(diffusive_wall(mw.values(), 0.0, &vg, 1.0).is_err());
    }

    #[test]
    fn wall_density_scales_with_half_space_fluxes() {
        let vg = VelocityGrid::new(16, 8.0).unwrap();
        let f = maxwellian(&MaxwellianParams { rho: 1.0, u: [0.2, 0.0], temperature: 1.0 }, &vg).unwrap();
        let (r1, _) = diffusive_wall(f.values(), 1.0, &vg, 1.0).unwrap();
        let (r2, _) = diffusive_wall(f.values(), 2.0, &vg, 1.0).unwrap();
        // Direct quadrature of both incoming half-space fluxes.
        let inc = |t: f64| {
            let m = maxwellian(&MaxwellianParams { rho: 1.0, u: [0.0; 2], temperature: t }, &vg).unwrap();
            (0..vg.len())
                .map(|q| {
                    let vx = vg.velocity(q)[0];
                    if vx > 0.0 { vx * m.values()[q] } else { 0.0 }
                })
                .sum::<f64>()
        };
        assert!((r2 / r1 - inc(1.0) / inc(2.0)).abs() < 1e-12);
    }

    #[test]
    fn walls_conserve_mass() {
        let (space, _) = grids(16);
        let vg = VelocityGrid::new(12, 6.0).unwrap();
        let f = global_maxwellian(space, vg);
        let solver = KineticSolver::new(
            space,
            vg,
            Boundary::DiffusiveWalls { t_left: 2.0, t_right: 1.0 },
            1e-2,
            &KineticModel::Bgk { b0: 1.0 },
        )
        .unwrap();
        let mut worst = 0.0f64;
        let out = solver
            .advance(&f, 0.0, 0.1, solver.default_dt(), |d| worst = worst.max(d.wall_mass_flux[0].max(d.wall_mass_flux[1])))
            .unwrap();
        assert!(worst < 1e-12, "{worst}");
        assert!((out.totals()[0] - f.totals()[0]).abs() < 1e-12);
        assert!(out.totals()[3] > f.totals()[3]);
    }

    #[test]
    fn periodic_transport_conserves_mass() {
        let (space, vg) = grids(20);
        let mut f = PhaseField::zeros(space, vg);
        for i in 0..20 {
            let x = space.center(i);
            for q in 0..vg.len() {
                f.cell_mut(i)[q] = (1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin()) * (q as f64 + 1.0);
            }
        }
        let solver = KineticSolver::new(space, vg, Boundary::Periodic, 1.0, &KineticModel::Bgk { b0: 1.0 }).unwrap();
        let out = solver.transport_step(&f, solver.default_dt()).unwrap();
        assert!((out.totals()[0] - f.totals()[0]).abs() < 1e-10 * f.totals()[0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let (space, vg) = grids(12);
        let m = KineticModel::Bgk { b0: 1.0 };
        assert!(KineticSolver::new(space, vg, Boundary::Periodic, 0.0, &m).is_err());
        let small = SpatialGrid1D::new(4, 1.0).unwrap();
        assert!(KineticSolver::new(small, vg, Boundary::Periodic, 1.0, &m).is_err());
        let plan = Arc::new(SpectralPlan::new(VelocityGrid::new(8, 4.0).unwrap(), 4).unwrap());
        let bm = KineticModel::Boltzmann { plan, kernel: CollisionKernel::new(1.0).unwrap() };
        assert!(matches!(KineticSolver::new(space, vg, Boundary::Periodic, 1.0, &bm), Err(Error::Shape(_))));
    }
}
