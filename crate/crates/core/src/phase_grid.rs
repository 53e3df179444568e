//! Uniform velocity/space grids, midpoint quadrature, weighted norms and
//! hydrodynamic moments.
//!
//! Velocity space is two dimensional and truncated to the symmetric box
//! `[-v_max, v_max]^2`. Nodes are cell centred, so the grid never contains
//! `v = 0` and reflections map nodes onto nodes exactly.

use crate::error::{Error, Result};

/// Number of velocity dimensions.
pub const DIM_V: usize = 2;

/// Cell-centred uniform velocity grid on `[-v_max, v_max]^2`.
///
/// Values living on the grid are stored row major: index `i1 * n + i2`
/// where `i1` indexes the first velocity component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityGrid {
    n: usize,
    v_max: f64,
}

impl VelocityGrid {
    pub fn new(n_per_dim: usize, v_max: f64) -> Result<Self> {
        if n_per_dim == 0 {
            return Err(Error::Parameter("velocity grid needs at least one node".into()));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::Parameter(format!("v_max must be positive, got {v_max}")));
        }
        Ok(Self { n: n_per_dim, v_max })
    }

    pub fn n_per_dim(&self) -> usize {
        self.n
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.v_max / self.n as f64
    }

    /// Total number of nodes (`n^2`).
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Measure of one velocity cell, `Δv^2`.
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// One-dimensional node coordinate `-v_max + (j + 1/2) Δv`.
    pub fn node(&self, j: usize) -> f64 {
        -self.v_max + (j as f64 + 0.5) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Velocity vector of the flat index `idx`.
    pub fn velocity(&self, idx: usize) -> [f64; 2] {
        [self.node(idx / self.n), self.node(idx % self.n)]
    }

    /// Flat index of the node reflected through the origin.
    pub fn reflected(&self, idx: usize) -> usize {
        let (i1, i2) = (idx / self.n, idx % self.n);
        (self.n - 1 - i1) * self.n + (self.n - 1 - i2)
    }
}

/// Cell-centred grid on `[0, length]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid1D {
    n_x: usize,
    length: f64,
}

impl SpatialGrid1D {
    pub fn new(n_x: usize, length: f64) -> Result<Self> {
        if n_x == 0 {
            return Err(Error::Parameter("spatial grid needs at least one cell".into()));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Parameter(format!("domain length must be positive, got {length}")));
        }
        Ok(Self { n_x, length })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_x as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing()
    }
}

/// Discrete density on a velocity grid (one point in space).
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    grid: VelocityGrid,
    values: Vec<f64>,
}

impl Distribution {
    pub fn zeros(grid: VelocityGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: VelocityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(v1, v2)` at every node.
    pub fn from_fn(grid: VelocityGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let [v1, v2] = grid.velocity(idx);
                f(v1, v2)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn ensure_same_grid(&self, other: &Distribution) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Shape("distributions live on different velocity grids".into()));
        }
        Ok(())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Distribution) -> Result<()> {
        self.ensure_same_grid(other)?;
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Distribution {
        Distribution { grid: self.grid, values: self.values.iter().map(|v| a * v).collect() }
    }

    /// `self - other`
    pub fn difference(&self, other: &Distribution) -> Result<Distribution> {
        self.ensure_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Distribution { grid: self.grid, values })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Discrete L¹ norm `Σ|f| Δv²`.
    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }
}

/// Hydrodynamic moments `(ρ, u, E)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub rho: f64,
    pub u: [f64; 2],
    pub energy: f64,
}

impl MomentSet {
    /// `T = (2E/ρ - |u|^2) / d_v`; zero for vacuum.
    pub fn temperature(&self) -> f64 {
        if self.rho <= 0.0 {
            return 0.0;
        }
        (2.0 * self.energy / self.rho - (self.u[0] * self.u[0] + self.u[1] * self.u[1]))
            / DIM_V as f64
    }

    /// Conserved vector `(ρ, ρu_x, ρu_y, E)`.
    pub fn conserved(&self) -> [f64; 4] {
        [self.rho, self.rho * self.u[0], self.rho * self.u[1], self.energy]
    }

    pub fn from_conserved(c: [f64; 4]) -> Self {
        let u = if c[0] != 0.0 { [c[1] / c[0], c[2] / c[0]] } else { [0.0, 0.0] };
        Self { rho: c[0], u, energy: c[3] }
    }

    pub fn from_primitive(rho: f64, u: [f64; 2], temperature: f64) -> Self {
        let energy = 0.5 * rho * (DIM_V as f64 * temperature + u[0] * u[0] + u[1] * u[1]);
        Self { rho, u, energy }
    }
}

/// Raw moments `(Σf, Σv1 f, Σv2 f, ½Σ|v|²f)·Δv²` of a slice on `grid`.
pub fn raw_moments(grid: &VelocityGrid, values: &[f64]) -> [f64; 4] {
    let n = grid.n_per_dim();
    let nodes = grid.nodes();
    let mut m = [0.0; 4];
    for i1 in 0..n {
        let v1 = nodes[i1];
        let row = &values[i1 * n..(i1 + 1) * n];
        let (mut s0, mut s2, mut se) = (0.0, 0.0, 0.0);
        for (i2, &f) in row.iter().enumerate() {
            let v2 = nodes[i2];
            s0 += f;
            s2 += v2 * f;
            se += v2 * v2 * f;
        }
        m[0] += s0;
        m[1] += v1 * s0;
        m[2] += s2;
        m[3] += se + v1 * v1 * s0;
    }
    let dv = grid.cell_volume();
    [m[0] * dv, m[1] * dv, m[2] * dv, 0.5 * m[3] * dv]
}

/// Midpoint-rule moments of `f`. A vanishing density reports `u = 0`.
pub fn compute_moments(f: &Distribution) -> MomentSet {
    moments_of_slice(f.grid(), f.values())
}

pub fn moments_of_slice(grid: &VelocityGrid, values: &[f64]) -> MomentSet {
    MomentSet::from_conserved(raw_moments(grid, values))
}

/// Polynomial velocity weight `1 + |v|^s` for every node; `s = 0` is the
/// unweighted norm.
pub fn velocity_weights(grid: &VelocityGrid, s: u32) -> Vec<f64> {
    if s == 0 {
        return vec![1.0; grid.len()];
    }
    (0..grid.len())
        .map(|idx| {
            let [v1, v2] = grid.velocity(idx);
            1.0 + (v1 * v1 + v2 * v2).sqrt().powi(s as i32)
        })
        .collect()
}

/// Norm exponent supported by [`weighted_norm`].
fn check_p(p: u32) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("only p = 1 or p = 2 are supported, got {p}")))
    }
}

/// `Σ |f|^p (1 + |v|^s) Δv^2 · cell_measure` over consecutive velocity blocks.
///
/// `values` may hold several velocity blocks back to back (one per spatial
/// cell); `cell_measure` is `Δx` for space dependent data and `1` otherwise.
/// No `1/p` root is taken.
pub fn weighted_norm_blocks(
    grid: &VelocityGrid,
    values: &[f64],
    cell_measure: f64,
    p: u32,
    s: u32,
) -> Result<f64> {
    check_p(p)?;
    if values.len() % grid.len() != 0 {
        return Err(Error::Shape(format!(
            "{} values is not a multiple of the velocity grid size {}",
            values.len(),
            grid.len()
        )));
    }
    let w = velocity_weights(grid, s);
    let mut total = 0.0;
    for block in values.chunks(grid.len()) {
        for (f, wk) in block.iter().zip(&w) {
            let a = f.abs();
            total += if p == 1 { a } else { a * a } * wk;
        }
    }
    Ok(total * grid.cell_volume() * cell_measure)
}

/// Weighted `L^p_s` functional of a single distribution (no root).
pub fn weighted_norm(f: &Distribution, p: u32, s: u32) -> Result<f64> {
    weighted_norm_blocks(f.grid(), f.values(), 1.0, p, s)
}

/// Rooted variant `(Σ |f|^p (1+|v|^s) Δv²)^{1/p}`, useful for diagnostics.
pub fn weighted_norm_rooted(f: &Distribution, p: u32, s: u32) -> Result<f64> {
    let n = weighted_norm(f, p, s)?;
    Ok(if p == 2 { n.sqrt() } else { n })
}

/// How the random-variable expectation inside the UQ norm is evaluated.
#[derive(Debug, Clone)]
pub enum ZAverage {
    /// Plain sample average over the provided realizations.
    Samples,
    /// Quadrature weights (summing to one), one per realization.
    Weights(Vec<f64>),
}

fn z_weights(avg: &ZAverage, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Parameter("UQ norm needs at least one realization".into()));
    }
    match avg {
        ZAverage::Samples => Ok(vec![1.0 / count as f64; count]),
        ZAverage::Weights(w) => {
            if w.len() != count {
                return Err(Error::Shape(format!(
                    "{} weights for {} realizations",
                    w.len(),
                    count
                )));
            }
            Ok(w.clone())
        }
    }
}

/// `‖ E_z[Z^2]^{1/2} ‖_{L^p_s}` for realizations `Z(z_k, ·)` stored as blocks.
pub fn uq_error_norm(
    grid: &VelocityGrid,
    deviations: &[Vec<f64>],
    avg: &ZAverage,
    cell_measure: f64,
    p: u32,
    s: u32,
) -> Result<f64> {
    let w = z_weights(avg, deviations.len())?;
    let len = deviations[0].len();
    if deviations.iter().any(|d| d.len() != len) {
        return Err(Error::Shape("realizations have different lengths".into()));
    }
    let mut rms = vec![0.0; len];
    for (d, wk) in deviations.iter().zip(&w) {
        for (r, x) in rms.iter_mut().zip(d) {
            *r += wk * x * x;
        }
    }
    rms.iter_mut().for_each(|r| *r = r.sqrt());
    weighted_norm_blocks(grid, &rms, cell_measure, p, s)
}

/// Alternate metric `E_z[ ‖Z‖_{L^p_s}^2 ]^{1/2}`.
pub fn uq_error_norm_outer(
    grid: &VelocityGrid,
    deviations: &[Vec<f64>],
    avg: &ZAverage,
    cell_measure: f64,
    p: u32,
    s: u32,
) -> Result<f64> {
    let w = z_weights(avg, deviations.len())?;
    let mut acc = 0.0;
    for (d, wk) in deviations.iter().zip(&w) {
        let n = weighted_norm_blocks(grid, d, cell_measure, p, s)?;
        acc += wk * n * n;
    }
    Ok(acc.sqrt())
}

/// `Σ |e_i|^p Δx` for a scalar field on a spatial grid (no root).
pub fn spatial_norm(values: &[f64], dx: f64, p: u32) -> Result<f64> {
    check_p(p)?;
    Ok(values.iter().map(|e| if p == 1 { e.abs() } else { e * e }).sum::<f64>() * dx)
}

/// Discrete Boltzmann entropy `Σ f log f Δv^2` (non-positive entries skipped).
pub fn discrete_entropy(f: &Distribution) -> f64 {
    f.values().iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
        * f.grid().cell_volume()
}

/// Boundary treatment of the 1D spatial domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Periodic,
    /// Zero-order extrapolation.
    Outflow,
    /// Diffusive walls re-emitting Maxwellians at the given temperatures.
    DiffusiveWalls { t_left: f64, t_right: f64 },
}

/// Distribution over `space × velocity`, stored cell by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    space: SpatialGrid1D,
    velocity: VelocityGrid,
    values: Vec<f64>,
}

impl PhaseField {
    pub fn zeros(space: SpatialGrid1D, velocity: VelocityGrid) -> Self {
        Self { space, velocity, values: vec![0.0; space.n_x() * velocity.len()] }
    }

    pub fn from_values(space: SpatialGrid1D, velocity: VelocityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n_x() * velocity.len() {
            return Err(Error::Shape(format!(
                "{} values for {} cells x {} velocities",
                values.len(),
                space.n_x(),
                velocity.len()
            )));
        }
        Ok(Self { space, velocity, values })
    }

    pub fn space(&self) -> &SpatialGrid1D {
        &self.space
    }

    pub fn velocity(&self) -> &VelocityGrid {
        &self.velocity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        let nv = self.velocity.len();
        &self.values[i * nv..(i + 1) * nv]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        let nv = self.velocity.len();
        &mut self.values[i * nv..(i + 1) * nv]
    }

    pub fn moments(&self) -> Vec<MomentSet> {
        (0..self.space.n_x()).map(|i| moments_of_slice(&self.velocity, self.cell(i))).collect()
    }

    /// Totals `Σ_x (ρ, ρu, E) Δx`.
    pub fn totals(&self) -> [f64; 4] {
        let dx = self.space.spacing();
        let mut t = [0.0; 4];
        for i in 0..self.space.n_x() {
            let m = raw_moments(&self.velocity, self.cell(i));
            for k in 0..4 {
                t[k] += m[k] * dx;
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: VelocityGrid) -> Distribution {
        Distribution::from_fn(grid, |v1, v2| (-(v1 * v1 + v2 * v2) / 2.0).exp() / (2.0 * PI))
    }

    #[test]
    fn grid_geometry() {
        let g = VelocityGrid::new(32, 8.0).unwrap();
        assert_eq!(g.spacing() * 32.0, 16.0);
        assert_eq!(g.node(0), -8.0 + 0.25);
        assert_eq!(g.node(31), 8.0 - 0.25);
        for idx in 0..g.len() {
            let [a, b] = g.velocity(idx);
            let [c, d] = g.velocity(g.reflected(idx));
            assert_eq!((a, b), (-c, -d));
        }
        assert!(VelocityGrid::new(0, 1.0).is_err());
        assert!(VelocityGrid::new(4, -1.0).is_err());
        let x = SpatialGrid1D::new(100, 1.0).unwrap();
        assert!((x.spacing() * 100.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn maxwellian_moments() {
        let g = VelocityGrid::new(32, 8.0).unwrap();
        let m = compute_moments(&gaussian(g));
        assert!((m.rho - 1.0).abs() < 1e-8);
        assert!(m.u[0].abs() < 1e-12 && m.u[1].abs() < 1e-12);
        assert!((m.energy - 1.0).abs() < 1e-8);
        assert!((m.temperature() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_field_moments() {
        let g = VelocityGrid::new(8, 4.0).unwrap();
        let m = compute_moments(&Distribution::zeros(g));
        assert_eq!(m, MomentSet { rho: 0.0, u: [0.0, 0.0], energy: 0.0 });
    }

    #[test]
    fn norms_of_maxwellian() {
        let g = VelocityGrid::new(32, 8.0).unwrap();
        let f = gaussian(g);
        assert!((weighted_norm(&f, 1, 0).unwrap() - 1.0).abs() < 1e-8);
        assert!((weighted_norm(&f, 1, 2).unwrap() - 3.0).abs() < 1e-8);
        assert_eq!(weighted_norm(&Distribution::zeros(g), 2, 2).unwrap(), 0.0);
        assert!(weighted_norm(&f, 3, 0).is_err());
        let rooted = weighted_norm_rooted(&f, 2, 0).unwrap();
        assert!((rooted * rooted - weighted_norm(&f, 2, 0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn uq_norm_cases() {
        let g = VelocityGrid::new(16, 6.0).unwrap();
        let base = gaussian(g);
        let gnorm = weighted_norm(&base, 1, 2).unwrap();
        let zero = vec![vec![0.0; g.len()]; 3];
        assert_eq!(uq_error_norm(&g, &zero, &ZAverage::Samples, 1.0, 1, 2).unwrap(), 0.0);

        let neg = base.scaled(-1.0).into_values();
        let single = vec![neg.clone()];
        let n1 = uq_error_norm(&g, &single, &ZAverage::Samples, 1.0, 1, 2).unwrap();
        assert!((n1 - gnorm).abs() < 1e-14 * gnorm);

        // z ∈ {-1, 1} equiprobable, Z = z g: E[Z^2]^{1/2} = |g|.
        let two = vec![neg, base.values().to_vec()];
        let n2 = uq_error_norm(&g, &two, &ZAverage::Weights(vec![0.5, 0.5]), 1.0, 1, 2).unwrap();
        assert!((n2 - gnorm).abs() < 1e-14 * gnorm);

        assert!(uq_error_norm(&g, &[], &ZAverage::Samples, 1.0, 1, 2).is_err());
        let outer = uq_error_norm_outer(&g, &two, &ZAverage::Samples, 1.0, 1, 2).unwrap();
        assert!(n2 <= outer * (1.0 + 1e-14));
    }

    #[test]
    fn symmetric_input_has_no_momentum() {
        let g = VelocityGrid::new(24, 7.0).unwrap();
        let f = Distribution::from_fn(g, |a, b| (-(a * a) - 0.3 * b * b).exp() * (1.0 + a * a * b * b));
        let m = compute_moments(&f);
        assert!(m.u[0].abs() <= 1e-12 && m.u[1].abs() <= 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn field(seed: &[f64], g: VelocityGrid) -> Distribution {
            Distribution::from_fn(g, |a, b| {
                seed[0] * (-(a - seed[1]).powi(2) - (b + seed[2]).powi(2)).exp() + seed[3]
            })
        }

        proptest! {
            #[test]
            fn norm_is_homogeneous(c in -5.0f64..5.0, p in 1u32..=2, s in 0u32..=2,
                                   a in 0.1f64..2.0, b in -1.0f64..1.0) {
                let g = VelocityGrid::new(12, 5.0).unwrap();
                let f = field(&[a, b, -b, 0.01], g);
                let lhs = weighted_norm(&f.scaled(c), p, s).unwrap();
                let rhs = c.abs().powi(p as i32) * weighted_norm(&f, p, s).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
            }

            #[test]
            fn moments_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, sh in -1.0f64..1.0) {
                let g = VelocityGrid::new(12, 5.0).unwrap();
                let f = field(&[1.0, sh, 0.2, 0.0], g);
                let h = field(&[0.5, -sh, 0.4, 0.01], g);
                let mut comb = f.scaled(a);
                comb.axpy(b, &h).unwrap();
                let mc = raw_moments(&g, comb.values());
                let mf = raw_moments(&g, f.values());
                let mh = raw_moments(&g, h.values());
                for k in 0..4 {
                    let expect = a * mf[k] + b * mh[k];
                    prop_assert!((mc[k] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
                }
            }
        }
    }
}
