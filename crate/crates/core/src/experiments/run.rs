use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::collision::{BgkFrequency, BgkOperator, BoltzmannOperator, CollisionKernel, CollisionOperator, SpectralPlan};
use crate::equilibrium::equilibrium_of;
use crate::error::{Error, Result};
use crate::euler1d::{ConservedField, EulerSolver};
use crate::homogeneous::{
    bgk_exact, bgk_exact_expectation, bgk_random_nu_expectation, solve_homogeneous_with, step_count, BgkDeviations,
};
use crate::kinetic1d::{KineticModel, KineticSolver};
use crate::phase_grid::{
    compute_moments, moments_of_slice, weighted_norm_blocks, Boundary, Distribution, MomentSet, SpatialGrid1D,
    VelocityGrid,
};
use crate::quadrature::gauss_legendre_unit;
use crate::uq::{
    mc_estimate, mscv_estimate_field, mscv_estimate_homogeneous, sample_z, sample_z_stream, weighted_mean,
    EstimatorResult, LambdaMode, MomentSamples, RunningMean, STREAM_FINE,
};

use super::config::{ControlVariate, ExperimentConfig, FullModel, ResolvedConfig};
use super::setup;

/// Observables stored per spatial cell: `ρ, u_x, u_y, E, T`.
pub const OBSERVABLES: usize = 5;
const T_INDEX: usize = 4;
/// Nodes of the collocation rule giving the exact control variate means.
pub const CV_MEAN_NODES: usize = 32;
/// Fine ensemble members solved per parallel batch.
const BATCH: usize = 256;

/// Per report time, the state of one solve (velocity field or cell observables).
type Snapshots = Vec<Vec<f64>>;

/// Expectation and standard deviation of the observables at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub mean: [f64; OBSERVABLES],
    pub sigma_t: f64,
}

/// Collocation reference in `z`.
#[derive(Debug, Clone)]
pub struct Reference {
    pub nodes: usize,
    pub model: FullModel,
    /// Expectation field per report time.
    pub mean: Vec<Vec<f64>>,
    /// Observables per report time and cell.
    pub stats: Vec<Vec<CellStats>>,
    /// Change of the expectation when the node count is halved, in the
    /// first configured norm.
    pub error_bar: Vec<f64>,
}

/// One estimator followed through the report times.
#[derive(Debug, Clone)]
pub struct EstimatorSeries {
    pub label: String,
    pub cv: ControlVariate,
    pub results: Vec<EstimatorResult>,
}

/// Error of one estimator in one norm at every report time.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub estimator: String,
    pub norm: String,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub overrides: Vec<String>,
    pub times: Vec<f64>,
    /// Paired random inputs shared by every estimator.
    pub z: Vec<f64>,
    pub z_hash: String,
    pub config_hash: String,
    pub estimators: Vec<EstimatorSeries>,
    pub curves: Vec<ErrorCurve>,
    pub reference: Reference,
    /// Largest net wall mass flux seen in any kinetic step (walls only).
    pub wall_flux_max: Option<f64>,
    pub wall_time_s: f64,
}

impl ExperimentResult {
    pub fn series(&self, label: &str) -> Option<&EstimatorSeries> {
        self.estimators.iter().find(|s| s.label == label)
    }

    pub fn curve(&self, estimator: &str, norm: &str) -> Option<&ErrorCurve> {
        self.curves.iter().find(|c| c.estimator == estimator && c.norm == norm)
    }

    /// Estimator whose `λ` goes to `lambda_field.csv`: the first one with a
    /// non-trivial `λ`.
    pub fn lambda_source(&self) -> Option<&EstimatorSeries> {
        self.estimators.iter().find(|s| s.results.iter().any(|r| r.lambda.is_some()) && s.cv != ControlVariate::None)
    }

    /// Velocity grid size per dimension, or `None` for cell observables.
    pub fn velocity_layout(&self) -> Option<usize> {
        self.config.is_homogeneous().then_some(self.config.n_v)
    }
}

pub fn estimator_label(cv: ControlVariate, mode: LambdaMode) -> String {
    format!("{}-{}", cv.name(), mode.name())
}

pub fn hash_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn z_hash(z: &[f64]) -> String {
    let bytes: Vec<u8> = z.iter().flat_map(|x| x.to_bits().to_le_bytes()).collect();
    hash_hex(&bytes)
}

fn observables(m: &MomentSet) -> [f64; OBSERVABLES] {
    [m.rho, m.u[0], m.u[1], m.energy, m.temperature()]
}

fn parse_norm(id: &str) -> Result<(u32, u32)> {
    let bad = || Error::Config(format!("unknown norm '{id}'"));
    let rest = id.strip_prefix('L').ok_or_else(bad)?;
    let (p, s) = rest.split_once('s').ok_or_else(bad)?;
    Ok((p.parse().map_err(|_| bad())?, s.parse().map_err(|_| bad())?))
}

/// Error of an expectation field against the reference in norm `id`.
fn field_error(cfg: &ExperimentConfig, grid: &VelocityGrid, est: &[f64], reference: &[f64], id: &str) -> Result<f64> {
    let diff: Vec<f64> = est.iter().zip(reference).map(|(a, b)| a - b).collect();
    if cfg.is_homogeneous() {
        let (p, s) = parse_norm(id)?;
        return weighted_norm_blocks(grid, &diff, 1.0, p, s);
    }
    let dx = 1.0 / cfg.n_x as f64;
    let t = diff.iter().skip(T_INDEX).step_by(OBSERVABLES);
    match id {
        "T-L1" => Ok(t.map(|e| e.abs()).sum::<f64>() * dx),
        "T-L2" => Ok((t.map(|e| e * e).sum::<f64>() * dx).sqrt()),
        _ => Err(Error::Config(format!("unknown norm '{id}'"))),
    }
}

/// Runs every configured estimator on one shared sample set and measures
/// them against the collocation reference.
pub fn run_experiment(resolved: &ResolvedConfig) -> Result<ExperimentResult> {
    let cfg = &resolved.config;
    cfg.validate()?;
    let start = Instant::now();
    let driver: Box<dyn Driver> = if cfg.is_homogeneous() {
        Box::new(HomogeneousDriver::new(cfg)?)
    } else {
        Box::new(FieldDriver::new(cfg)?)
    };
    let times = driver.times().to_vec();
    let z = sample_z(cfg.samples, cfg.seed);

    log::info!("test {}: {} samples", cfg.test, z.len());
    let f_samples = solve_all(&*driver, &z)?;
    let reference = collocation_reference_with(&*driver, cfg)?;

    let mut estimators = vec![EstimatorSeries {
        label: "mc".into(),
        cv: ControlVariate::None,
        results: (0..times.len())
            .map(|t| {
                let f: Vec<Vec<f64>> = f_samples.iter().map(|s| s[t].clone()).collect();
                Ok(EstimatorResult {
                    mean: mc_estimate(&f)?,
                    lambda: None,
                    lambda_blocks: None,
                    var_cv: None,
                    cov: None,
                    m: f.len(),
                    m_e: None,
                    mode: LambdaMode::Zero,
                })
            })
            .collect::<Result<_>>()?,
    }];

    let mut cv_cache: Vec<(ControlVariate, CvData)> = Vec::new();
    for (cv, mode) in cfg.estimators() {
        if !cv_cache.iter().any(|(c, _)| *c == cv) {
            log::info!("control variate {}", cv.name());
            cv_cache.push((cv, driver.control_variate(cv, &z)?));
        }
        let data = &cv_cache.iter().find(|(c, _)| *c == cv).expect("cached").1;
        let results = (0..times.len())
            .map(|t| {
                let f: Vec<Vec<f64>> = f_samples.iter().map(|s| s[t].clone()).collect();
                let c: Vec<Vec<f64>> = data.paired.iter().map(|s| s[t].clone()).collect();
                let fm = driver.temperature_samples(&f);
                let cm = driver.temperature_samples(&c);
                let moments = MomentSamples { f: &fm, cv: &cm, block_len: driver.block_len() };
                match data.m_e {
                    None => mscv_estimate_homogeneous(&f, &c, &data.mean[t], mode, Some(moments)),
                    Some(me) => mscv_estimate_field(&f, &z, &c, &data.paired_z, &data.mean[t], me, mode, Some(moments)),
                }
            })
            .collect::<Result<_>>()?;
        estimators.push(EstimatorSeries { label: estimator_label(cv, mode), cv, results });
    }

    let mut curves = Vec::new();
    for series in &estimators {
        for norm in &cfg.norms {
            let errors = series
                .results
                .iter()
                .zip(&reference.mean)
                .map(|(r, reference)| field_error(cfg, driver.grid(), &r.mean, reference, norm))
                .collect::<Result<_>>()?;
            curves.push(ErrorCurve { estimator: series.label.clone(), norm: norm.clone(), errors });
        }
    }

    let config_hash = hash_hex(super::config::to_toml(cfg)?.as_bytes());
    Ok(ExperimentResult {
        config: cfg.clone(),
        overrides: resolved.overrides.clone(),
        times,
        z_hash: z_hash(&z),
        z,
        config_hash,
        estimators,
        curves,
        reference,
        wall_flux_max: driver.wall_flux_max(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Collocation reference of the configured full model with `n_nodes`
/// Gauss–Legendre nodes, and its node-halving error bar.
pub fn collocation_reference(cfg: &ExperimentConfig, n_nodes: usize) -> Result<Reference> {
    let mut cfg = cfg.clone();
    cfg.reference_nodes = n_nodes;
    cfg.validate()?;
    if cfg.is_homogeneous() {
        collocation_reference_with(&HomogeneousDriver::new(&cfg)?, &cfg)
    } else {
        collocation_reference_with(&FieldDriver::new(&cfg)?, &cfg)
    }
}

fn collocation_reference_with(driver: &dyn Driver, cfg: &ExperimentConfig) -> Result<Reference> {
    let n = cfg.reference_nodes;
    log::info!("collocation reference: {n} and {} nodes", n / 2);
    let (nodes, weights) = gauss_legendre_unit(n)?;
    let snaps = solve_all(driver, &nodes)?;
    let (mean, stats) = weighted_stats(driver, &snaps, &weights)?;
    let (half_nodes, half_weights) = gauss_legendre_unit(n / 2)?;
    let half_snaps = solve_all(driver, &half_nodes)?;
    let (half_mean, _) = weighted_stats(driver, &half_snaps, &half_weights)?;
    let norm = &cfg.norms[0];
    let error_bar = mean
        .iter()
        .zip(&half_mean)
        .map(|(a, b)| field_error(cfg, driver.grid(), a, b, norm))
        .collect::<Result<_>>()?;
    Ok(Reference { nodes: n, model: cfg.model, mean, stats, error_bar })
}

fn weighted_stats(
    driver: &dyn Driver,
    snaps: &[Snapshots],
    weights: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<CellStats>>)> {
    let n_times = snaps[0].len();
    let mut means = Vec::with_capacity(n_times);
    let mut stats = Vec::with_capacity(n_times);
    for t in 0..n_times {
        let fields: Vec<Vec<f64>> = snaps.iter().map(|s| s[t].clone()).collect();
        means.push(weighted_mean(&fields, weights)?);
        let obs: Vec<Vec<f64>> = fields.iter().map(|f| driver.observables(f)).collect();
        let obs_mean = weighted_mean(&obs, weights)?;
        let cells = obs_mean.len() / OBSERVABLES;
        let row = (0..cells)
            .map(|c| {
                let base = c * OBSERVABLES;
                let tm = obs_mean[base + T_INDEX];
                let var: f64 = obs.iter().zip(weights).map(|(o, w)| w * (o[base + T_INDEX] - tm).powi(2)).sum();
                let mut mean = [0.0; OBSERVABLES];
                mean.copy_from_slice(&obs_mean[base..base + OBSERVABLES]);
                CellStats { mean, sigma_t: var.max(0.0).sqrt() }
            })
            .collect();
        stats.push(row);
    }
    Ok((means, stats))
}

fn solve_all(driver: &dyn Driver, z: &[f64]) -> Result<Vec<Snapshots>> {
    z.par_iter().map(|&z| driver.solve(z)).collect()
}

/// Control variate samples on the paired inputs and the mean they are corrected with.
struct CvData {
    paired: Vec<Snapshots>,
    paired_z: Vec<f64>,
    mean: Vec<Vec<f64>>,
    /// Fine ensemble size; `None` when the mean is exact.
    m_e: Option<usize>,
}

trait Driver: Sync {
    fn times(&self) -> &[f64];
    fn grid(&self) -> &VelocityGrid;
    fn solve(&self, z: f64) -> Result<Snapshots>;
    /// Cell observables of one stored state, `OBSERVABLES` per cell.
    fn observables(&self, state: &[f64]) -> Vec<f64>;
    /// Per sample, the temperature of each `λ` block.
    fn temperature_samples(&self, states: &[Vec<f64>]) -> Vec<Vec<f64>>;
    fn block_len(&self) -> usize;
    fn control_variate(&self, cv: ControlVariate, z: &[f64]) -> Result<CvData>;
    fn wall_flux_max(&self) -> Option<f64> {
        None
    }
}

// ----- space homogeneous tests -------------------------------------------

struct HomogeneousDriver {
    cfg: ExperimentConfig,
    grid: VelocityGrid,
    plan: Option<Arc<SpectralPlan>>,
    dt: f64,
    report_steps: Vec<usize>,
    times: Vec<f64>,
}

impl HomogeneousDriver {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let grid = VelocityGrid::new(cfg.n_v, cfg.v_max)?;
        let dt = cfg.dt.ok_or_else(|| Error::Config("space homogeneous tests need a fixed dt".into()))?;
        let steps = step_count(dt, cfg.t_final).map_err(|e| Error::Config(e.to_string()))?;
        let every = ((cfg.report_interval / dt).round() as usize).max(1);
        let mut report_steps: Vec<usize> = (0..=steps).step_by(every).collect();
        if *report_steps.last().expect("non-empty") != steps {
            report_steps.push(steps);
        }
        let times = report_steps.iter().map(|&s| s as f64 * dt).collect();
        let plan = match cfg.model {
            FullModel::Boltzmann => Some(Arc::new(SpectralPlan::new(grid, cfg.n_angles)?)),
            FullModel::Bgk => None,
        };
        Ok(Self { cfg: cfg.clone(), grid, plan, dt, report_steps, times })
    }

    fn operator(&self, b0: f64) -> Result<Box<dyn CollisionOperator>> {
        Ok(match &self.plan {
            Some(plan) => Box::new(BoltzmannOperator::new(plan.clone(), CollisionKernel::new(b0)?)),
            None => Box::new(BgkOperator { grid: self.grid, frequency: BgkFrequency::DensityScaled(b0) }),
        })
    }

    /// `(f0, f∞, ν)` of the BGK control variate at `z`.
    fn bgk_data(&self, z: f64) -> Result<(Distribution, Distribution, f64)> {
        let f0 = setup::homogeneous_initial(&self.cfg, self.grid, z);
        let f_inf = equilibrium_of(&f0)?;
        let nu = compute_moments(&f0).rho * setup::kernel_b0(&self.cfg, z);
        Ok((f0, f_inf, nu))
    }

    fn exact_means(&self) -> Result<(Distribution, Distribution)> {
        let (nodes, weights) = gauss_legendre_unit(CV_MEAN_NODES)?;
        let data: Vec<(Distribution, Distribution, f64)> =
            nodes.iter().map(|&z| self.bgk_data(z)).collect::<Result<_>>()?;
        let f0: Vec<Vec<f64>> = data.iter().map(|d| d.0.values().to_vec()).collect();
        let fi: Vec<Vec<f64>> = data.iter().map(|d| d.1.values().to_vec()).collect();
        Ok((
            Distribution::from_values(self.grid, weighted_mean(&f0, &weights)?)?,
            Distribution::from_values(self.grid, weighted_mean(&fi, &weights)?)?,
        ))
    }
}

impl Driver for HomogeneousDriver {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    fn solve(&self, z: f64) -> Result<Snapshots> {
        let f0 = setup::homogeneous_initial(&self.cfg, self.grid, z);
        let op = self.operator(setup::kernel_b0(&self.cfg, z))?;
        let mut out = Vec::with_capacity(self.report_steps.len());
        let mut next = 0;
        solve_homogeneous_with(&f0, &*op, self.dt, self.cfg.t_final, |step, _, f| {
            if next < self.report_steps.len() && step == self.report_steps[next] {
                out.push(f.values().to_vec());
                next += 1;
            }
            Ok(())
        })?;
        Ok(out)
    }

    fn observables(&self, state: &[f64]) -> Vec<f64> {
        observables(&moments_of_slice(&self.grid, state)).to_vec()
    }

    fn temperature_samples(&self, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        states.iter().map(|s| vec![moments_of_slice(&self.grid, s).temperature()]).collect()
    }

    fn block_len(&self) -> usize {
        self.grid.len()
    }

    fn control_variate(&self, cv: ControlVariate, z: &[f64]) -> Result<CvData> {
        let data: Vec<(Distribution, Distribution, f64)> = z.iter().map(|&z| self.bgk_data(z)).collect::<Result<_>>()?;
        let (f0_mean, f_inf_mean) = self.exact_means()?;
        let (paired, mean): (Vec<Snapshots>, Vec<Vec<f64>>) = match cv {
            ControlVariate::Equilibrium => (
                data.iter().map(|d| vec![d.1.values().to_vec(); self.times.len()]).collect(),
                vec![f_inf_mean.values().to_vec(); self.times.len()],
            ),
            ControlVariate::Bgk => {
                let paired = data
                    .iter()
                    .map(|(f0, fi, nu)| {
                        self.times.iter().map(|&t| Ok(bgk_exact(f0, fi, *nu, t)?.into_values())).collect()
                    })
                    .collect::<Result<_>>()?;
                let mean = if self.cfg.s > 0.0 && setup::kernel_b0(&self.cfg, 1.0) != 1.0 {
                    // Random collision frequency with deterministic initial datum.
                    let (f0, fi, _) = self.bgk_data(0.0)?;
                    let rho = compute_moments(&f0).rho;
                    let nus: Vec<f64> = sample_z_stream(self.cfg.me, self.cfg.seed, STREAM_FINE)
                        .iter()
                        .map(|&zf| rho * setup::kernel_b0(&self.cfg, zf))
                        .collect();
                    let dev = BgkDeviations::Shared(f0.difference(&fi)?.into_values());
                    let nu_bar = rho * setup::mean_kernel_b0(&self.cfg);
                    self.times
                        .iter()
                        .map(|&t| Ok(bgk_random_nu_expectation(&f0, &fi, &dev, &nus, nu_bar, t)?.into_values()))
                        .collect::<Result<_>>()?
                } else {
                    let nu = compute_moments(&f0_mean).rho * setup::mean_kernel_b0(&self.cfg);
                    self.times
                        .iter()
                        .map(|&t| Ok(bgk_exact_expectation(&f0_mean, &f_inf_mean, nu, t)?.into_values()))
                        .collect::<Result<_>>()?
                };
                (paired, mean)
            }
            other => return Err(Error::Config(format!("control variate '{}' needs a space dependent test", other.name()))),
        };
        let m_e = None;
        Ok(CvData { paired, paired_z: z.to_vec(), mean, m_e })
    }
}

// ----- space dependent tests ---------------------------------------------

struct FieldDriver {
    cfg: ExperimentConfig,
    space: SpatialGrid1D,
    velocity: VelocityGrid,
    plan: Option<Arc<SpectralPlan>>,
    dt_max: f64,
    times: Vec<f64>,
    wall_flux: std::sync::Mutex<f64>,
}

impl FieldDriver {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let space = SpatialGrid1D::new(cfg.n_x, 1.0)?;
        let velocity = VelocityGrid::new(cfg.n_v, cfg.v_max)?;
        // Relaxation stiffness ν Δt / ε is kept at most 1; RK2 alone would allow 2
        // but leaves no room for transport.
        let rho_max = setup::field_moments(cfg, &space, 1.0).iter().fold(0.0f64, |a, m| a.max(m.rho));
        let nu_max = (setup::kernel_b0(cfg, 1.0).max(setup::kernel_b0(cfg, 0.0)) * rho_max).max(1.0);
        let rule = (space.spacing() / (2.0 * cfg.v_max)).min(cfg.eps / nu_max);
        let dt_max = cfg.dt.unwrap_or(rule);
        let intervals = (cfg.t_final / cfg.report_interval * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let times = (0..=intervals).map(|j| (j as f64 * cfg.report_interval).min(cfg.t_final)).collect();
        let needs_plan = cfg.model == FullModel::Boltzmann;
        let plan = if needs_plan { Some(Arc::new(SpectralPlan::new(velocity, cfg.n_angles)?)) } else { None };
        Ok(Self { cfg: cfg.clone(), space, velocity, plan, dt_max, times, wall_flux: std::sync::Mutex::new(0.0) })
    }

    fn kinetic(&self, z: f64, model: FullModel) -> Result<Snapshots> {
        let b0 = setup::kernel_b0(&self.cfg, z);
        let model = match model {
            FullModel::Boltzmann => KineticModel::Boltzmann {
                plan: self.plan.clone().ok_or_else(|| Error::Config("Boltzmann model needs a spectral plan".into()))?,
                kernel: CollisionKernel::new(b0)?,
            },
            FullModel::Bgk => KineticModel::Bgk { b0 },
        };
        let solver = KineticSolver::new(self.space, self.velocity, setup::boundary(&self.cfg, z), self.cfg.eps, &model)?;
        let mut f = setup::field_initial(&self.cfg, self.space, self.velocity, z)?;
        let mut out = vec![cell_observables(&f.moments())];
        let mut flux = 0.0f64;
        for w in self.times.windows(2) {
            f = solver.advance(&f, w[0], w[1], self.dt_max, |d| {
                flux = flux.max(d.wall_mass_flux[0]).max(d.wall_mass_flux[1]);
            })?;
            out.push(cell_observables(&f.moments()));
        }
        let mut g = self.wall_flux.lock().expect("wall flux lock");
        *g = g.max(flux);
        Ok(out)
    }

    fn euler(&self, z: f64) -> Result<Snapshots> {
        let solver = match setup::boundary(&self.cfg, z) {
            Boundary::DiffusiveWalls { t_left, t_right } => {
                EulerSolver::with_walls(self.space, t_left, t_right, self.velocity)?
            }
            b => EulerSolver::new(self.space, b)?,
        };
        let mut u = ConservedField::from_moments(self.space, &setup::field_moments(&self.cfg, &self.space, z))?;
        let mut out = vec![cell_observables(&u.moments())];
        for w in self.times.windows(2) {
            u = solver.advance(&u, w[0], w[1])?;
            out.push(cell_observables(&u.moments()));
        }
        Ok(out)
    }

    fn solve_cv(&self, cv: ControlVariate, z: f64) -> Result<Snapshots> {
        match cv {
            ControlVariate::Euler => self.euler(z),
            ControlVariate::Bgk => self.kinetic(z, FullModel::Bgk),
            other => Err(Error::Config(format!("control variate '{}' needs a space homogeneous test", other.name()))),
        }
    }
}

fn cell_observables(moments: &[MomentSet]) -> Vec<f64> {
    moments.iter().flat_map(observables).collect()
}

impl Driver for FieldDriver {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn grid(&self) -> &VelocityGrid {
        &self.velocity
    }

    fn solve(&self, z: f64) -> Result<Snapshots> {
        self.kinetic(z, self.cfg.model)
    }

    fn observables(&self, state: &[f64]) -> Vec<f64> {
        state.to_vec()
    }

    fn temperature_samples(&self, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        states.iter().map(|s| s.iter().skip(T_INDEX).step_by(OBSERVABLES).copied().collect()).collect()
    }

    fn block_len(&self) -> usize {
        OBSERVABLES
    }

    fn control_variate(&self, cv: ControlVariate, z: &[f64]) -> Result<CvData> {
        let paired = z.par_iter().map(|&z| self.solve_cv(cv, z)).collect::<Result<Vec<_>>>()?;
        let fine = sample_z_stream(self.cfg.me, self.cfg.seed, STREAM_FINE);
        let mut acc: Vec<RunningMean> = (0..self.times.len()).map(|_| RunningMean::new()).collect();
        for chunk in fine.chunks(BATCH) {
            let snaps = chunk.par_iter().map(|&z| self.solve_cv(cv, z)).collect::<Result<Vec<_>>>()?;
            for s in &snaps {
                for (a, state) in acc.iter_mut().zip(s) {
                    a.push(state)?;
                }
            }
        }
        let mean = acc.iter().map(|a| a.mean()).collect::<Result<_>>()?;
        Ok(CvData { paired, paired_z: z.to_vec(), mean, m_e: Some(self.cfg.me) })
    }

    fn wall_flux_max(&self) -> Option<f64> {
        matches!(setup::boundary(&self.cfg, 0.0), Boundary::DiffusiveWalls { .. })
            .then(|| *self.wall_flux.lock().expect("wall flux lock"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{build_test, parse_table, resolve};

    fn small(text: &str) -> ExperimentResult {
        run_experiment(&resolve(&parse_table(text).unwrap()).unwrap()).unwrap()
    }

    fn means(r: &ExperimentResult, label: &str) -> Vec<Vec<f64>> {
        r.series(label).unwrap().results.iter().map(|x| x.mean.clone()).collect()
    }

    #[test]
    fn deterministic_equilibrium_cv_is_monte_carlo() {
        let r = small(
            "test = 2\nn_v = 16\nv_max = 8.0\nn_angles = 4\ndt = 0.1\nt_final = 0.5\nreport_interval = 0.1\n\
             samples = 4\nreference_nodes = 4\ncv = [\"equilibrium\"]",
        );
        let mc = means(&r, "mc");
        assert_eq!(mc, means(&r, "equilibrium-optimal"));
        assert_eq!(r.curve("mc", "L1s0").unwrap().errors[0], 0.0);
        assert_eq!(r.times.len(), 6);
    }

    #[test]
    fn kernel_independent_euler_cv_is_monte_carlo() {
        let r = small(
            "test = 4\nn_v = 16\nn_x = 12\nt_final = 0.02\nreport_interval = 0.01\nsamples = 3\nme = 8\n\
             reference_nodes = 2",
        );
        assert_eq!(means(&r, "mc"), means(&r, "euler-optimal-moment"));
        let blocks = r.series("euler-optimal-moment").unwrap().results[1].lambda_blocks.clone().unwrap();
        assert!(blocks.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn collocation_of_deterministic_problem_has_no_spread() {
        let mut cfg = build_test(1, crate::experiments::Scale::Desk).unwrap();
        cfg.s = 0.0;
        cfg.n_v = 16;
        cfg.v_max = 8.0;
        cfg.n_angles = 4;
        cfg.t_final = 0.2;
        cfg.report_interval = 0.1;
        cfg.dt = Some(0.1);
        let r = collocation_reference(&cfg, 4).unwrap();
        assert_eq!(r.mean.len(), 3);
        for (e, row) in r.error_bar.iter().zip(&r.stats) {
            assert!(*e < 1e-15, "{e}");
            assert!(row[0].sigma_t < 1e-7, "{}", row[0].sigma_t);
        }
    }

    #[test]
    fn two_nodes_integrate_a_linear_initial_temperature() {
        let mut cfg = build_test(3, crate::experiments::Scale::Desk).unwrap();
        cfg.n_x = 10;
        cfg.t_final = 0.01;
        cfg.report_interval = 0.01;
        let r = collocation_reference(&cfg, 2).unwrap();
        let t0 = &r.stats[0];
        // T(z) = T_L + s z on the left: mean T_L + s/2, spread s/√12.
        let cell = &t0[0];
        let (rho, t) = setup::SOD_LEFT;
        assert!((cell.mean[0] - rho).abs() < 1e-12);
        assert!((cell.mean[T_INDEX] - (t + 0.5 * cfg.s)).abs() < 1e-9, "{}", cell.mean[T_INDEX]);
        assert!((cell.sigma_t - cfg.s / 12f64.sqrt()).abs() < 1e-9, "{}", cell.sigma_t);
    }

    #[test]
    fn runs_are_reproducible() {
        let text = "test = 1\nn_v = 16\nv_max = 8.0\nn_angles = 4\ndt = 0.1\nt_final = 0.2\nreport_interval = 0.1\n\
                    samples = 3\nreference_nodes = 2";
        let (a, b) = (small(text), small(text));
        assert_eq!(a.z_hash, b.z_hash);
        assert_eq!(a.curves, b.curves);
        assert_eq!(a.config_hash, b.config_hash);
    }

    #[test]
    fn unknown_norm_is_a_config_error() {
        assert!(matches!(parse_norm("Lxs0"), Err(Error::Config(_))));
        assert_eq!(parse_norm("L2s3").unwrap(), (2, 3));
    }
}
