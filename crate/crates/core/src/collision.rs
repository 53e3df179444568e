//! Collision operators for Maxwell molecules in two velocity dimensions.
//!
//! The Boltzmann operator is evaluated spectrally on the periodized box
//! `[-v_max, v_max]^2` with relative velocities truncated to a ball of radius
//! `R`. Two evaluations share the same kernel modes:
//!
//! * [`q_boltzmann_direct`] sums over all mode pairs, `O(n^4)`;
//! * [`q_boltzmann_fast`] discretizes the angular integral of the Carleman
//!   representation with `N_a` directions; each direction is a product of two
//!   band-limited fields, i.e. one convolution evaluated with FFTs.
//!
//! With the loss term written through the same angular quadrature, both
//! variants conserve mass to rounding.

use std::f64::consts::{PI, SQRT_2};
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::equilibrium::matched_equilibrium_into;
use crate::error::{Error, Result};
use crate::phase_grid::{raw_moments, Distribution, VelocityGrid};

/// `R = SUPPORT_FACTOR * 2 v_max` keeps the truncated operator alias free.
pub const SUPPORT_FACTOR: f64 = 1.0 / (3.0 + SQRT_2);

/// Constant collision kernel `B = b0 / (2π)` per unit angle.
///
/// The loss term of the untruncated operator is `b0 ρ f`, which is also the
/// frequency used by the BGK operators below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionKernel {
    b0: f64,
}

impl CollisionKernel {
    pub fn new(b0: f64) -> Result<Self> {
        if !(b0 > 0.0) || !b0.is_finite() {
            return Err(Error::Parameter(format!("kernel magnitude must be positive, got {b0}")));
        }
        Ok(Self { b0 })
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralMethod {
    Direct,
    #[default]
    Fast,
}

type FftHandle = Arc<dyn Fft<f64>>;

struct Ffts {
    fwd: FftHandle,
    inv: FftHandle,
    len: usize,
}

impl Ffts {
    fn new(planner: &mut FftPlanner<f64>, len: usize) -> Self {
        Self { fwd: planner.plan_fft_forward(len), inv: planner.plan_fft_inverse(len), len }
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let fft = if forward { &self.fwd } else { &self.inv };
        let n = self.len;
        fft.process(data);
        transpose(data, n);
        fft.process(data);
        transpose(data, n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn phi(radius: f64, s: f64) -> f64 {
    let x = radius * s;
    if x.abs() < 1e-8 {
        2.0 * radius * (1.0 - x * x / 6.0)
    } else {
        2.0 * x.sin() / s
    }
}

/// Precomputed kernel modes for one velocity grid.
///
/// Immutable after construction; the direct-method table is built on first use.
pub struct SpectralPlan {
    grid: VelocityGrid,
    n_angles: usize,
    ratio: f64,
    radius: f64,
    /// Largest mode index; modes run over `-kmax..=kmax` with `kmax = n/2`.
    kmax: i64,
    small: Ffts,
    padded: Ffts,
    /// Per angle: `φ(ξ·e⊥)` and `φ(ξ·e)` for every retained mode.
    gain: Vec<(Vec<f64>, Vec<f64>)>,
    /// Loss weights `G(l, l)` from the same angular rule.
    loss: Vec<f64>,
    direct: OnceLock<Vec<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("grid", &self.grid)
            .field("n_angles", &self.n_angles)
            .field("radius", &self.radius)
            .finish()
    }
}

impl SpectralPlan {
    pub fn new(grid: VelocityGrid, n_angles: usize) -> Result<Self> {
        Self::with_ratio(grid, n_angles, 1.0)
    }

    /// `ratio` in `(0, 1]` scales the truncation radius below the alias-free bound.
    pub fn with_ratio(grid: VelocityGrid, n_angles: usize, ratio: f64) -> Result<Self> {
        let n = grid.n_per_dim();
        if n < 4 || n % 2 != 0 {
            return Err(Error::Parameter(format!(
                "spectral method needs an even number of points per dimension >= 4, got {n}"
            )));
        }
        if n_angles < 1 {
            return Err(Error::Parameter("at least one angular direction is required".into()));
        }
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::Parameter(format!("anti-aliasing ratio must lie in (0, 1], got {ratio}")));
        }
        let radius = ratio * SUPPORT_FACTOR * 2.0 * grid.v_max();
        let mut planner = FftPlanner::new();
        let small = Ffts::new(&mut planner, n);
        let padded = Ffts::new(&mut planner, 2 * n);
        let kmax = (n / 2) as i64;
        let mut plan = Self {
            grid,
            n_angles,
            ratio,
            radius,
            kmax,
            small,
            padded,
            gain: Vec::new(),
            loss: Vec::new(),
            direct: OnceLock::new(),
        };
        let xi = plan.mode_frequencies();
        // Kernel 1/π times the angular weight π/N_a.
        let w = 1.0 / n_angles as f64;
        let mut loss = vec![0.0; xi.len()];
        for p in 0..n_angles {
            let th = PI * p as f64 / n_angles as f64;
            let (c, s) = (th.cos(), th.sin());
            let par: Vec<f64> = xi.iter().map(|k| phi(radius, k[0] * c + k[1] * s)).collect();
            let perp: Vec<f64> = xi.iter().map(|k| phi(radius, -k[0] * s + k[1] * c)).collect();
            for (l, (a, b)) in loss.iter_mut().zip(perp.iter().zip(&par)) {
                *l += w * a * b;
            }
            plan.gain.push((perp, par));
        }
        plan.loss = loss;
        Ok(plan)
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Truncation radius of relative velocities.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn modes_per_dim(&self) -> usize {
        (2 * self.kmax + 1) as usize
    }

    /// `ξ_k = π k / v_max` for the retained modes, compact row-major order.
    fn mode_frequencies(&self) -> Vec<[f64; 2]> {
        let scale = PI / self.grid.v_max();
        let mut out = Vec::with_capacity(self.modes_per_dim().pow(2));
        for k1 in -self.kmax..=self.kmax {
            for k2 in -self.kmax..=self.kmax {
                out.push([scale * k1 as f64, scale * k2 as f64]);
            }
        }
        out
    }

    fn check(&self, f: &Distribution) -> Result<()> {
        if *f.grid() != self.grid {
            return Err(Error::Shape("distribution does not live on the plan's velocity grid".into()));
        }
        Ok(())
    }

    /// Fourier coefficients (divided by `n^2`) in compact order; the Nyquist
    /// bin is shared equally by the modes `±n/2`.
    fn spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let n = self.grid.n_per_dim();
        let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.small.transform(&mut buf, true);
        let m = self.modes_per_dim();
        let norm = 1.0 / (n * n) as f64;
        let half = |k: i64| if k.abs() == self.kmax { 0.5 } else { 1.0 };
        let mut out = Vec::with_capacity(m * m);
        for k1 in -self.kmax..=self.kmax {
            let a1 = k1.rem_euclid(n as i64) as usize;
            for k2 in -self.kmax..=self.kmax {
                let a2 = k2.rem_euclid(n as i64) as usize;
                out.push(buf[a1 * n + a2] * (norm * half(k1) * half(k2)));
            }
        }
        out
    }

    /// Values on the grid of a compact spectrum.
    fn synthesize(&self, coeffs: &[Complex64], out: &mut [f64]) {
        let n = self.grid.n_per_dim();
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        self.scatter(coeffs, &mut buf, n);
        self.small.transform(&mut buf, false);
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.re;
        }
    }

    fn scatter(&self, coeffs: &[Complex64], buf: &mut [Complex64], len: usize) {
        let mut idx = 0;
        for k1 in -self.kmax..=self.kmax {
            let a1 = k1.rem_euclid(len as i64) as usize;
            for k2 in -self.kmax..=self.kmax {
                let a2 = k2.rem_euclid(len as i64) as usize;
                buf[a1 * len + a2] += coeffs[idx];
                idx += 1;
            }
        }
    }

    /// Padded-grid values of `coeffs ∘ weights`.
    fn padded_field(&self, coeffs: &[Complex64], weights: Option<&[f64]>) -> Vec<Complex64> {
        let len = 2 * self.grid.n_per_dim();
        let mut buf = vec![Complex64::new(0.0, 0.0); len * len];
        match weights {
            Some(w) => {
                let scaled: Vec<Complex64> = coeffs.iter().zip(w).map(|(c, x)| c * x).collect();
                self.scatter(&scaled, &mut buf, len);
            }
            None => self.scatter(coeffs, &mut buf, len),
        }
        self.padded.transform(&mut buf, false);
        buf
    }

    /// Kernel-mode table `β(l, m) = G(l, m) - G(l, l)` of the direct method,
    /// with the angular integral resolved far beyond the band limit.
    fn direct_table(&self) -> &[f64] {
        self.direct.get_or_init(|| {
            let xi = self.mode_frequencies();
            let xmax = PI / self.grid.v_max() * self.kmax as f64 * SQRT_2;
            let n_ref = 8 * (self.radius * xmax).ceil() as usize + 64;
            let nm = xi.len();
            let mut perp = DMatrix::<f64>::zeros(nm, n_ref);
            let mut par = DMatrix::<f64>::zeros(nm, n_ref);
            for p in 0..n_ref {
                let th = PI * p as f64 / n_ref as f64;
                let (c, s) = (th.cos(), th.sin());
                for (i, k) in xi.iter().enumerate() {
                    perp[(i, p)] = phi(self.radius, -k[0] * s + k[1] * c);
                    par[(i, p)] = phi(self.radius, k[0] * c + k[1] * s);
                }
            }
            // Kernel 1/π times the angular weight π/n_ref.
            let g = (&perp * par.transpose()) / n_ref as f64;
            let mut table = vec![0.0; nm * nm];
            for l in 0..nm {
                let gll = g[(l, l)];
                for m in 0..nm {
                    table[l * nm + m] = g[(l, m)] - gll;
                }
            }
            table
        })
    }

    fn eval_direct(&self, g: &[f64], h: &[f64], out: &mut [f64]) {
        let gs = self.spectrum(g);
        let hs = self.spectrum(h);
        let table = self.direct_table();
        let md = self.modes_per_dim() as i64;
        let nm = (md * md) as usize;
        let k = self.kmax;
        let mut q = vec![Complex64::new(0.0, 0.0); nm];
        for k1 in -k..=k {
            for k2 in -k..=k {
                let ki = ((k1 + k) * md + (k2 + k)) as usize;
                let mut acc = Complex64::new(0.0, 0.0);
                let l1_lo = (k1 - k).max(-k);
                let l1_hi = (k1 + k).min(k);
                let l2_lo = (k2 - k).max(-k);
                let l2_hi = (k2 + k).min(k);
                for l1 in l1_lo..=l1_hi {
                    let m1 = k1 - l1;
                    for l2 in l2_lo..=l2_hi {
                        let m2 = k2 - l2;
                        let li = ((l1 + k) * md + (l2 + k)) as usize;
                        let mi = ((m1 + k) * md + (m2 + k)) as usize;
                        acc += gs[li] * hs[mi] * table[li * nm + mi];
                    }
                }
                q[ki] = acc;
            }
        }
        self.synthesize(&q, out);
    }

    fn eval_fast(&self, g: &[f64], h: &[f64], out: &mut [f64]) {
        let gs = self.spectrum(g);
        let hs = self.spectrum(h);
        let len = 2 * self.grid.n_per_dim();
        let w = 1.0 / self.n_angles as f64;
        let mut acc = vec![Complex64::new(0.0, 0.0); len * len];
        for (perp, par) in &self.gain {
            let a = self.padded_field(&gs, Some(perp));
            let b = self.padded_field(&hs, Some(par));
            for ((o, x), y) in acc.iter_mut().zip(&a).zip(&b) {
                *o += x * y * w;
            }
        }
        let a = self.padded_field(&gs, Some(&self.loss));
        let b = self.padded_field(&hs, None);
        for ((o, x), y) in acc.iter_mut().zip(&a).zip(&b) {
            *o -= x * y;
        }
        self.padded.transform(&mut acc, true);
        let norm = 1.0 / (len * len) as f64;
        let mut q = Vec::with_capacity(self.modes_per_dim().pow(2));
        for k1 in -self.kmax..=self.kmax {
            let a1 = k1.rem_euclid(len as i64) as usize;
            for k2 in -self.kmax..=self.kmax {
                let a2 = k2.rem_euclid(len as i64) as usize;
                q.push(acc[a1 * len + a2] * norm);
            }
        }
        self.synthesize(&q, out);
    }

    /// `Q(g, h)` written into `out` (gain `g(v'_*) h(v')`, loss `g(v_*) h(v)`).
    pub fn apply_into(
        &self,
        method: SpectralMethod,
        kernel: &CollisionKernel,
        g: &[f64],
        h: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let len = self.grid.len();
        if g.len() != len || h.len() != len || out.len() != len {
            return Err(Error::Shape(format!(
                "collision operands must have {len} entries (got {}, {}, {})",
                g.len(),
                h.len(),
                out.len()
            )));
        }
        match method {
            SpectralMethod::Direct => self.eval_direct(g, h, out),
            SpectralMethod::Fast => self.eval_fast(g, h, out),
        }
        let b0 = kernel.b0();
        out.iter_mut().for_each(|q| *q *= b0);
        Ok(())
    }
}

fn bilinear(
    method: SpectralMethod,
    g: &Distribution,
    h: &Distribution,
    kernel: &CollisionKernel,
    plan: &SpectralPlan,
) -> Result<Distribution> {
    plan.check(g)?;
    plan.check(h)?;
    let mut out = vec![0.0; g.grid().len()];
    plan.apply_into(method, kernel, g.values(), h.values(), &mut out)?;
    Distribution::from_values(*g.grid(), out)
}

/// Classical spectral evaluation of `Q(g, h)` (the correctness oracle).
pub fn q_boltzmann_direct(
    g: &Distribution,
    h: &Distribution,
    kernel: &CollisionKernel,
    plan: &SpectralPlan,
) -> Result<Distribution> {
    bilinear(SpectralMethod::Direct, g, h, kernel, plan)
}

/// Fast spectral evaluation of `Q(g, h)` with the plan's `N_a` directions.
pub fn q_boltzmann_fast(
    g: &Distribution,
    h: &Distribution,
    kernel: &CollisionKernel,
    plan: &SpectralPlan,
) -> Result<Distribution> {
    bilinear(SpectralMethod::Fast, g, h, kernel, plan)
}

/// `ν (M[f] - f)` with `M[f]` the moment-matched Maxwellian of `f`.
pub fn q_bgk(f: &Distribution, nu: f64) -> Result<Distribution> {
    if !(nu > 0.0) {
        return Err(Error::Parameter(format!("collision frequency must be positive, got {nu}")));
    }
    let mut out = vec![0.0; f.grid().len()];
    bgk_into(f.grid(), f.values(), BgkFrequency::Constant(nu), &mut out)?;
    Distribution::from_values(*f.grid(), out)
}

/// `L¹` norm of `Q(f,f) - Q(g,g) - Q(g,f∞) - Q(f∞,g) - Q(f∞,f∞)` with `g = f - f∞`.
pub fn micro_macro_residual(
    f: &Distribution,
    f_inf: &Distribution,
    kernel: &CollisionKernel,
    plan: &SpectralPlan,
    method: SpectralMethod,
) -> Result<f64> {
    let g = f.difference(f_inf)?;
    let q = |a: &Distribution, b: &Distribution| bilinear(method, a, b, kernel, plan);
    let mut r = q(f, f)?;
    r.axpy(-1.0, &q(&g, &g)?)?;
    r.axpy(-1.0, &q(&g, f_inf)?)?;
    r.axpy(-1.0, &q(f_inf, &g)?)?;
    r.axpy(-1.0, &q(f_inf, f_inf)?)?;
    Ok(r.l1())
}

/// How the BGK relaxation frequency is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BgkFrequency {
    Constant(f64),
    /// `ν = b0 ρ` with `ρ` the local density of the relaxing state.
    DensityScaled(f64),
}

fn bgk_into(grid: &VelocityGrid, f: &[f64], freq: BgkFrequency, out: &mut [f64]) -> Result<()> {
    let m = matched_equilibrium_into(grid, f, out)?;
    let nu = match freq {
        BgkFrequency::Constant(nu) => nu,
        BgkFrequency::DensityScaled(b0) => b0 * m.rho,
    };
    for (o, &x) in out.iter_mut().zip(f) {
        *o = nu * (*o - x);
    }
    Ok(())
}

/// Right-hand side `∂_t f = C(f)` of a space homogeneous collision model.
pub trait CollisionOperator: Send + Sync {
    fn grid(&self) -> &VelocityGrid;
    fn apply(&self, f: &[f64], out: &mut [f64]) -> Result<()>;
}

/// `Q(f, f)` for a fixed kernel.
#[derive(Debug, Clone)]
pub struct BoltzmannOperator {
    pub plan: Arc<SpectralPlan>,
    pub kernel: CollisionKernel,
    pub method: SpectralMethod,
    /// Apply [`conserve_moments`] after every evaluation.
    pub conservative: bool,
}

impl BoltzmannOperator {
    /// Fast evaluation with the moment correction switched on.
    pub fn new(plan: Arc<SpectralPlan>, kernel: CollisionKernel) -> Self {
        Self { plan, kernel, method: SpectralMethod::Fast, conservative: true }
    }
}

/// Removes the discrete mass, momentum and energy of `q` by subtracting
/// `f (a + b·v + c|v|²)`, the smallest such change in the `1/f` weighted
/// `L²` norm for positive `f`. The weight is kept signed so the correction
/// stays smooth in `f`.
///
/// The truncated spectral operator conserves mass only; without the
/// correction the temperature drifts at a rate proportional to the kernel.
pub fn conserve_moments(grid: &VelocityGrid, f: &[f64], q: &mut [f64]) -> Result<()> {
    if f.len() != grid.len() || q.len() != grid.len() {
        return Err(Error::Shape("moment correction: length mismatch".into()));
    }
    let n = grid.n_per_dim();
    let nodes = grid.nodes();
    let basis = |idx: usize| {
        let (v1, v2) = (nodes[idx / n], nodes[idx % n]);
        [1.0, v1, v2, v1 * v1 + v2 * v2]
    };
    let mut gram = Matrix4::<f64>::zeros();
    let mut rhs = Vector4::<f64>::zeros();
    for (idx, (&fi, &qi)) in f.iter().zip(q.iter()).enumerate() {
        let phi = Vector4::from(basis(idx));
        gram += phi * phi.transpose() * fi;
        rhs += phi * qi;
    }
    let Some(coef) = gram.lu().solve(&rhs) else {
        return Ok(());
    };
    for (idx, (qi, &fi)) in q.iter_mut().zip(f).enumerate() {
        let phi = Vector4::from(basis(idx));
        *qi -= fi * phi.dot(&coef);
    }
    Ok(())
}

impl CollisionOperator for BoltzmannOperator {
    fn grid(&self) -> &VelocityGrid {
        self.plan.grid()
    }

    fn apply(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        self.plan.apply_into(self.method, &self.kernel, f, f, out)?;
        if self.conservative {
            conserve_moments(self.plan.grid(), f, out)?;
        }
        Ok(())
    }
}

/// BGK relaxation toward the moment-matched Maxwellian.
#[derive(Debug, Clone, Copy)]
pub struct BgkOperator {
    pub grid: VelocityGrid,
    pub frequency: BgkFrequency,
}

impl CollisionOperator for BgkOperator {
    fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    fn apply(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        bgk_into(&self.grid, f, self.frequency, out)
    }
}

/// Largest absolute discrete moment `(mass, momentum, energy)` of `Q`.
pub fn moment_defects(q: &Distribution) -> [f64; 3] {
    let m = raw_moments(q.grid(), q.values());
    [m[0].abs(), m[1].abs().max(m[2].abs()), m[3].abs()]
}
