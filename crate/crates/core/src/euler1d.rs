//! 1D compressible Euler equations for a gas with two velocity degrees of
//! freedom (`γ = 2`), discretized with component-wise WENO5, global
//! Lax–Friedrichs splitting and SSP-RK2.

use crate::equilibrium::{maxwellian, moment_matched_maxwellian, MaxwellianParams};
use crate::error::{Error, Result};
use crate::phase_grid::{Boundary, MomentSet, PhaseField, SpatialGrid1D, VelocityGrid, DIM_V};
use crate::weno::reconstruct;

/// Adiabatic exponent `(d_v + 2) / d_v`.
pub const GAMMA: f64 = (DIM_V as f64 + 2.0) / DIM_V as f64;
const GHOSTS: usize = 3;

/// Conserved variables `(ρ, ρu_x, ρu_y, E)` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedField {
    pub grid: SpatialGrid1D,
    pub cells: Vec<[f64; 4]>,
}

impl ConservedField {
    pub fn new(grid: SpatialGrid1D, cells: Vec<[f64; 4]>) -> Result<Self> {
        if cells.len() != grid.n_x() {
            return Err(Error::Shape(format!("{} cells for a grid of {}", cells.len(), grid.n_x())));
        }
        Ok(Self { grid, cells })
    }

    pub fn from_moments(grid: SpatialGrid1D, moments: &[MomentSet]) -> Result<Self> {
        Self::new(grid, moments.iter().map(|m| m.conserved()).collect())
    }

    /// Moments of a kinetic field, cell by cell.
    pub fn from_phase(field: &PhaseField) -> Self {
        let cells = field.moments().iter().map(|m| m.conserved()).collect();
        Self { grid: *field.space(), cells }
    }

    pub fn moments(&self) -> Vec<MomentSet> {
        self.cells.iter().map(|c| MomentSet::from_conserved(*c)).collect()
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.moments().iter().map(|m| m.temperature()).collect()
    }

    /// `Σ U Δx`.
    pub fn totals(&self) -> [f64; 4] {
        let dx = self.grid.spacing();
        let mut t = [0.0; 4];
        for c in &self.cells {
            for k in 0..4 {
                t[k] += c[k] * dx;
            }
        }
        t
    }
}

fn primitive(u: &[f64; 4]) -> Result<(f64, f64, f64, f64)> {
    let rho = u[0];
    if !(rho > 0.0) {
        return Err(Error::Numerical(format!("non-positive density {rho}")));
    }
    let (ux, uy) = (u[1] / rho, u[2] / rho);
    let t = (2.0 * u[3] / rho - ux * ux - uy * uy) / DIM_V as f64;
    if !(t >= 0.0) {
        return Err(Error::Numerical(format!("negative temperature {t}")));
    }
    Ok((rho, ux, uy, rho * t))
}

/// `F(U) = (ρu_x, ρu_x² + p, ρu_x u_y, (E + p) u_x)` with `p = ρT`.
pub fn euler_flux(u: &[f64; 4]) -> Result<[f64; 4]> {
    let (rho, ux, uy, p) = primitive(u)?;
    Ok([rho * ux, rho * ux * ux + p, rho * ux * uy, (u[3] + p) * ux])
}

fn wave_speed(u: &[f64; 4]) -> Result<f64> {
    let (rho, ux, _, p) = primitive(u)?;
    Ok(ux.abs() + (GAMMA * p / rho).sqrt())
}

/// Largest `|u_x| + c` over the field.
pub fn max_wave_speed(field: &ConservedField) -> Result<f64> {
    field.cells.iter().try_fold(0.0f64, |a, c| Ok(a.max(wave_speed(c)?)))
}

/// Per-cell Maxwellians with the moments of `U`, matched on the discrete grid.
pub fn lift_to_equilibrium(field: &ConservedField, grid: &VelocityGrid) -> Result<PhaseField> {
    let mut out = PhaseField::zeros(field.grid, *grid);
    for (i, m) in field.moments().iter().enumerate() {
        let f = moment_matched_maxwellian(m, grid)?;
        out.cell_mut(i).copy_from_slice(f.values());
    }
    Ok(out)
}

/// Euler solver on a fixed grid and boundary.
///
/// Diffusive walls need a velocity grid: the wall flux is the kinetic flux of
/// the lifted boundary cell with the incoming half re-emitted at the wall
/// temperature.
#[derive(Debug, Clone)]
pub struct EulerSolver {
    pub grid: SpatialGrid1D,
    pub boundary: Boundary,
    pub wall_grid: Option<VelocityGrid>,
    pub cfl: f64,
}

impl EulerSolver {
    pub fn new(grid: SpatialGrid1D, boundary: Boundary) -> Result<Self> {
        if grid.n_x() < 7 {
            return Err(Error::Parameter(format!("WENO5 needs at least 7 cells, got {}", grid.n_x())));
        }
        if matches!(boundary, Boundary::DiffusiveWalls { .. }) {
            return Err(Error::Parameter("diffusive walls need a velocity grid; use with_walls".into()));
        }
        Ok(Self { grid, boundary, wall_grid: None, cfl: 0.4 })
    }

    pub fn with_walls(grid: SpatialGrid1D, t_left: f64, t_right: f64, velocity: VelocityGrid) -> Result<Self> {
        if grid.n_x() < 7 {
            return Err(Error::Parameter(format!("WENO5 needs at least 7 cells, got {}", grid.n_x())));
        }
        if !(t_left > 0.0 && t_right > 0.0) {
            return Err(Error::Parameter("wall temperatures must be positive".into()));
        }
        Ok(Self {
            grid,
            boundary: Boundary::DiffusiveWalls { t_left, t_right },
            wall_grid: Some(velocity),
            cfl: 0.4,
        })
    }

    fn extended(&self, cells: &[[f64; 4]]) -> Vec<[f64; 4]> {
        let n = cells.len();
        let mut ext = Vec::with_capacity(n + 2 * GHOSTS);
        for g in 0..GHOSTS {
            let k = GHOSTS - g; // distance from the boundary
            ext.push(match self.boundary {
                Boundary::Periodic => cells[n - k],
                Boundary::Outflow => cells[0],
                Boundary::DiffusiveWalls { .. } => mirror(cells[k - 1]),
            });
        }
        ext.extend_from_slice(cells);
        for k in 0..GHOSTS {
            ext.push(match self.boundary {
                Boundary::Periodic => cells[k],
                Boundary::Outflow => cells[n - 1],
                Boundary::DiffusiveWalls { .. } => mirror(cells[n - 1 - k]),
            });
        }
        ext
    }

    /// `-∂_x F(U)` cell by cell.
    fn rhs(&self, cells: &[[f64; 4]]) -> Result<Vec<[f64; 4]>> {
        let n = cells.len();
        let ext = self.extended(cells);
        let mut alpha = 0.0f64;
        let mut fp = Vec::with_capacity(ext.len());
        let mut fm = Vec::with_capacity(ext.len());
        let mut flux = Vec::with_capacity(ext.len());
        for u in &ext {
            alpha = alpha.max(wave_speed(u)?);
            flux.push(euler_flux(u)?);
        }
        for (u, f) in ext.iter().zip(&flux) {
            let mut p = [0.0; 4];
            let mut m = [0.0; 4];
            for k in 0..4 {
                p[k] = 0.5 * (f[k] + alpha * u[k]);
                m[k] = 0.5 * (f[k] - alpha * u[k]);
            }
            fp.push(p);
            fm.push(m);
        }
        // Face j sits between cells j-1 and j (interior numbering), j = 0..=n.
        let mut faces = vec![[0.0; 4]; n + 1];
        for (j, face) in faces.iter_mut().enumerate() {
            let l = j + GHOSTS - 1; // extended index of the cell left of the face
            for k in 0..4 {
                face[k] = reconstruct(fp[l - 2][k], fp[l - 1][k], fp[l][k], fp[l + 1][k], fp[l + 2][k])
                    + reconstruct(fm[l + 3][k], fm[l + 2][k], fm[l + 1][k], fm[l][k], fm[l - 1][k]);
            }
        }
        if let (Boundary::DiffusiveWalls { t_left, t_right }, Some(vg)) = (self.boundary, self.wall_grid) {
            faces[0] = wall_flux(&cells[0], t_left, &vg, 1.0)?;
            faces[n] = wall_flux(&cells[n - 1], t_right, &vg, -1.0)?;
        }
        let dx = self.grid.spacing();
        Ok((0..n)
            .map(|i| {
                let mut r = [0.0; 4];
                for k in 0..4 {
                    r[k] = -(faces[i + 1][k] - faces[i][k]) / dx;
                }
                r
            })
            .collect())
    }

    /// One SSP-RK2 step.
    pub fn step(&self, field: &ConservedField, dt: f64) -> Result<ConservedField> {
        if field.grid != self.grid {
            return Err(Error::Shape("field and solver use different spatial grids".into()));
        }
        let u0 = &field.cells;
        let l0 = self.rhs(u0)?;
        let u1: Vec<[f64; 4]> = u0.iter().zip(&l0).map(|(u, l)| add(u, l, dt)).collect();
        check_admissible(&u1, "first stage")?;
        let l1 = self.rhs(&u1)?;
        let u2: Vec<[f64; 4]> = u0
            .iter()
            .zip(u1.iter().zip(&l1))
            .map(|(a, (b, l))| {
                let s = add(b, l, dt);
                [0.5 * (a[0] + s[0]), 0.5 * (a[1] + s[1]), 0.5 * (a[2] + s[2]), 0.5 * (a[3] + s[3])]
            })
            .collect();
        check_admissible(&u2, "second stage")?;
        Ok(ConservedField { grid: self.grid, cells: u2 })
    }

    /// CFL time step `cfl Δx / max(|u_x| + c)`.
    pub fn stable_dt(&self, field: &ConservedField) -> Result<f64> {
        Ok(self.cfl * self.grid.spacing() / max_wave_speed(field)?)
    }

    /// Advances from `t0` to `t1` with CFL steps, landing on `t1` exactly.
    pub fn advance(&self, field: &ConservedField, t0: f64, t1: f64) -> Result<ConservedField> {
        let mut u = field.clone();
        let mut t = t0;
        let tol = 1e-12 * t1.abs().max(1.0);
        while t1 - t > tol {
            let dt = self.stable_dt(&u)?;
            if t + dt >= t1 - tol {
                u = self.step(&u, t1 - t)?;
                break;
            }
            u = self.step(&u, dt)?;
            t += dt;
        }
        Ok(u)
    }
}

fn mirror(u: [f64; 4]) -> [f64; 4] {
    [u[0], -u[1], u[2], u[3]]
}

fn add(u: &[f64; 4], l: &[f64; 4], dt: f64) -> [f64; 4] {
    [u[0] + dt * l[0], u[1] + dt * l[1], u[2] + dt * l[2], u[3] + dt * l[3]]
}

fn check_admissible(cells: &[[f64; 4]], stage: &str) -> Result<()> {
    for (i, c) in cells.iter().enumerate() {
        if let Err(e) = primitive(c) {
            return Err(Error::Numerical(format!("Euler positivity lost in cell {i} ({stage}): {e}")));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite Euler state in cell {i} ({stage})")));
        }
    }
    Ok(())
}

/// Flux `(ρ, ρu, E)` through a diffusive wall whose inward normal is `normal`
/// (`+1` at the left wall, `-1` at the right wall), in the `+x` direction.
fn wall_flux(cell: &[f64; 4], t_wall: f64, grid: &VelocityGrid, normal: f64) -> Result<[f64; 4]> {
    let f = moment_matched_maxwellian(&MomentSet::from_conserved(*cell), grid)?;
    let mw = maxwellian(&MaxwellianParams { rho: 1.0, u: [0.0, 0.0], temperature: t_wall }, grid)?;
    let (out_flux, in_flux) = half_fluxes(grid, f.values(), mw.values(), normal);
    if in_flux <= 0.0 {
        return Err(Error::Numerical("wall Maxwellian carries no incoming flux".into()));
    }
    let rho_w = out_flux / in_flux;
    let mut flux = [0.0; 4];
    let dv = grid.cell_volume();
    for idx in 0..grid.len() {
        let [v1, v2] = grid.velocity(idx);
        let value = if v1 * normal < 0.0 { f.values()[idx] } else { rho_w * mw.values()[idx] };
        let w = v1 * value * dv;
        flux[0] += w;
        flux[1] += v1 * w;
        flux[2] += v2 * w;
        flux[3] += 0.5 * (v1 * v1 + v2 * v2) * w;
    }
    Ok(flux)
}

/// `(Σ_{v·n<0} |v·n| f, Σ_{v·n>0} v·n M)` on the grid (times `Δv²`).
pub(crate) fn half_fluxes(grid: &VelocityGrid, f: &[f64], mw: &[f64], normal: f64) -> (f64, f64) {
    let dv = grid.cell_volume();
    let (mut out, mut inc) = (0.0, 0.0);
    for idx in 0..grid.len() {
        let vn = grid.velocity(idx)[0] * normal;
        if vn < 0.0 {
            out -= vn * f[idx];
        } else if vn > 0.0 {
            inc += vn * mw[idx];
        }
    }
    (out * dv, inc * dv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_examples() {
        assert_eq!(euler_flux(&[1.0, 0.0, 0.0, 1.0]).unwrap(), [0.0, 1.0, 0.0, 0.0]);
        let e = 0.5 * (2.0 + 1.0);
        let f = euler_flux(&[1.0, 1.0, 0.0, e]).unwrap();
        for (a, b) in f.iter().zip([1.0, 2.0, 0.0, 2.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(euler_flux(&[0.0, 0.0, 0.0, 1.0]), Err(Error::Numerical(_))));
        assert_eq!(GAMMA, 2.0);
    }

    #[test]
    fn constant_state_is_preserved() {
        let grid = SpatialGrid1D::new(20, 1.0).unwrap();
        for bc in [Boundary::Periodic, Boundary::Outflow] {
            let solver = EulerSolver::new(grid, bc).unwrap();
            let u = ConservedField::new(grid, vec![[1.0, 0.3, -0.1, 1.2]; 20]).unwrap();
            let next = solver.step(&u, 0.01).unwrap();
            for (a, b) in next.cells.iter().zip(&u.cells) {
                for k in 0..4 {
                    assert!((a[k] - b[k]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn periodic_run_conserves_totals() {
        let grid = SpatialGrid1D::new(40, 1.0).unwrap();
        let solver = EulerSolver::new(grid, Boundary::Periodic).unwrap();
        let cells: Vec<[f64; 4]> = (0..40)
            .map(|i| {
                let x = grid.center(i);
                let rho = 1.0 + 0.2 * (2.0 * std::f64::consts::PI * x).sin();
                MomentSet::from_primitive(rho, [0.5, 0.1], 1.0).conserved()
            })
            .collect();
        let u0 = ConservedField::new(grid, cells).unwrap();
        let u1 = solver.advance(&u0, 0.0, 0.3).unwrap();
        let (a, b) = (u0.totals(), u1.totals());
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() < 1e-13, "component {k}");
        }
    }

    #[test]
    fn walls_block_mass_flux() {
        let grid = SpatialGrid1D::new(20, 1.0).unwrap();
        let vg = VelocityGrid::new(16, 8.0).unwrap();
        let solver = EulerSolver::with_walls(grid, 2.0, 1.0, vg).unwrap();
        let u0 = ConservedField::new(grid, vec![MomentSet::from_primitive(1.0, [0.0; 2], 1.0).conserved(); 20])
            .unwrap();
        let u1 = solver.advance(&u0, 0.0, 0.1).unwrap();
        assert!((u0.totals()[0] - u1.totals()[0]).abs() < 1e-13);
        // Heating raises the energy next to the hot wall.
        assert!(u1.cells[0][3] > u0.cells[0][3]);
    }

    #[test]
    fn lift_matches_moments() {
        let grid = SpatialGrid1D::new(8, 1.0).unwrap();
        let vg = VelocityGrid::new(16, 8.0).unwrap();
        let u = ConservedField::new(
            grid,
            (0..8).map(|i| MomentSet::from_primitive(1.0 + 0.1 * i as f64, [0.2, 0.0], 0.8).conserved()).collect(),
        )
        .unwrap();
        let f = lift_to_equilibrium(&u, &vg).unwrap();
        let back = ConservedField::from_phase(&f);
        for (a, b) in back.cells.iter().zip(&u.cells) {
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_grids_are_rejected() {
        let grid = SpatialGrid1D::new(5, 1.0).unwrap();
        assert!(EulerSolver::new(grid, Boundary::Outflow).is_err());
    }
}
