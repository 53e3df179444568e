//! Sampling of the random input and the Monte Carlo / control variate estimators.
//!
//! All means are computed as `x0 + Σ (x_k - x0) / M` with `x0` the first
//! sample. This is exact for identical samples, which makes the reduction
//! identities between estimators hold bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stream of the paired kinetic / control variate samples.
pub const STREAM_PAIRED: u64 = 0;
/// Stream of the independent fine control variate ensemble.
pub const STREAM_FINE: u64 = 1;

/// `m` uniform draws on `[0, 1)` from stream `stream` of generator `seed`.
pub fn sample_z_stream(m: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..m).map(|_| rng.gen::<f64>()).collect()
}

/// `m` paired-stream draws of a scalar uniform input.
pub fn sample_z(m: usize, seed: u64) -> Vec<f64> {
    sample_z_stream(m, seed, STREAM_PAIRED)
}

fn check_samples(samples: &[Vec<f64>], min: usize) -> Result<usize> {
    if samples.len() < min {
        return Err(Error::Parameter(format!(
            "at least {min} samples are required, got {}",
            samples.len()
        )));
    }
    let len = samples[0].len();
    if samples.iter().any(|s| s.len() != len) {
        return Err(Error::Shape("samples have different lengths".into()));
    }
    Ok(len)
}

/// Streaming mean with a fixed shift (the first sample).
#[derive(Debug, Clone, Default)]
pub struct RunningMean {
    shift: Vec<f64>,
    sum: Vec<f64>,
    count: usize,
}

impl RunningMean {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if self.count == 0 {
            self.shift = x.to_vec();
            self.sum = vec![0.0; x.len()];
        } else {
            if x.len() != self.shift.len() {
                return Err(Error::Shape("running mean fed samples of different lengths".into()));
            }
            for ((s, a), b) in self.sum.iter_mut().zip(x).zip(&self.shift) {
                *s += a - b;
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::Parameter("mean of an empty sample set".into()));
        }
        let inv = self.count as f64;
        Ok(self.shift.iter().zip(&self.sum).map(|(a, s)| a + s / inv).collect())
    }
}

/// Arithmetic mean of the sample fields.
pub fn mc_estimate(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_samples(samples, 1)?;
    let mut acc = RunningMean::new();
    for s in samples {
        acc.push(s)?;
    }
    acc.mean()
}

/// `x0 + Σ w_k (x_k - x0)` for weights summing to one.
pub fn weighted_mean(samples: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    let len = check_samples(samples, 1)?;
    if weights.len() != samples.len() {
        return Err(Error::Shape(format!("{} weights for {} samples", weights.len(), samples.len())));
    }
    let x0 = &samples[0];
    let mut out = x0.clone();
    for i in 0..len {
        let mut acc = 0.0;
        for (s, w) in samples.iter().zip(weights) {
            acc += w * (s[i] - x0[i]);
        }
        out[i] += acc;
    }
    Ok(out)
}

/// Unbiased `(Var_M(cv), Cov_M(f, cv))`, pointwise.
pub fn var_cov_estimators(f: &[Vec<f64>], cv: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = check_samples(f, 2)?;
    let len_cv = check_samples(cv, 2)?;
    if f.len() != cv.len() || len != len_cv {
        return Err(Error::Shape("kinetic and control variate samples differ in shape".into()));
    }
    let fm = mc_estimate(f)?;
    let cm = mc_estimate(cv)?;
    let mut var = vec![0.0; len];
    let mut cov = vec![0.0; len];
    for (fs, cs) in f.iter().zip(cv) {
        for i in 0..len {
            let dc = cs[i] - cm[i];
            var[i] += dc * dc;
            cov[i] += (fs[i] - fm[i]) * dc;
        }
    }
    let inv = 1.0 / (f.len() - 1) as f64;
    var.iter_mut().for_each(|v| *v *= inv);
    cov.iter_mut().for_each(|c| *c *= inv);
    Ok((var, cov))
}

fn lambda_from(var: &[f64], cov: &[f64]) -> Vec<f64> {
    let delta = 1e-14 * var.iter().fold(0.0f64, |a, v| a.max(*v));
    var.iter()
        .zip(cov)
        .map(|(v, c)| if *v == 0.0 { 0.0 } else { c / (v + delta) })
        .collect()
}

/// `λ* = Cov_M(f, cv) / (Var_M(cv) + δ)`, zero where the control variate does not vary.
pub fn lambda_star(f: &[Vec<f64>], cv: &[Vec<f64>]) -> Result<Vec<f64>> {
    let (var, cov) = var_cov_estimators(f, cv)?;
    Ok(lambda_from(&var, &cov))
}

/// `λ*` of a moment: `f` and `cv` hold one moment value per point (e.g. per cell).
pub fn lambda_star_moment(f_moment: &[Vec<f64>], cv_moment: &[Vec<f64>]) -> Result<Vec<f64>> {
    lambda_star(f_moment, cv_moment)
}

/// `λ̃ = M_E / (M + M_E) λ`.
pub fn lambda_cost_corrected(lambda: &[f64], m: usize, m_e: usize) -> Vec<f64> {
    let factor = m_e as f64 / (m + m_e) as f64;
    lambda.iter().map(|l| l * factor).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    Zero,
    One,
    Optimal,
    OptimalMoment,
    CostCorrected,
}

impl LambdaMode {
    pub const ALL: [LambdaMode; 5] = [
        LambdaMode::Zero,
        LambdaMode::One,
        LambdaMode::Optimal,
        LambdaMode::OptimalMoment,
        LambdaMode::CostCorrected,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LambdaMode::Zero => "zero",
            LambdaMode::One => "one",
            LambdaMode::Optimal => "optimal",
            LambdaMode::OptimalMoment => "optimal-moment",
            LambdaMode::CostCorrected => "cost-corrected",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown lambda mode '{s}'")))
    }
}

/// Moment samples from which a blockwise `λ` is computed.
///
/// Entry `j` of each sample is the moment of block `j`; the resulting `λ_j`
/// applies to the `block_len` consecutive field values of that block.
#[derive(Debug, Clone, Copy)]
pub struct MomentSamples<'a> {
    pub f: &'a [Vec<f64>],
    pub cv: &'a [Vec<f64>],
    pub block_len: usize,
}

/// Expectation estimate and the diagnostics behind it.
#[derive(Debug, Clone)]
pub struct EstimatorResult {
    pub mean: Vec<f64>,
    /// `λ` per field point; absent for `λ = 0`.
    pub lambda: Option<Vec<f64>>,
    /// Blockwise `λ` in moment mode.
    pub lambda_blocks: Option<Vec<f64>>,
    pub var_cv: Option<Vec<f64>>,
    pub cov: Option<Vec<f64>>,
    pub m: usize,
    pub m_e: Option<usize>,
    pub mode: LambdaMode,
}

/// `λ ⟨cv⟩ + E_M[f - λ cv]`, algebraically `E_M[f] - λ (E_M[cv] - ⟨cv⟩)`.
///
/// `λ = 1` gives `⟨cv⟩ + E_M[f - cv]` exactly.
pub fn control_variate_mean(
    f: &[Vec<f64>],
    cv: &[Vec<f64>],
    cv_mean: &[f64],
    lambda: &[f64],
) -> Result<Vec<f64>> {
    let len = check_samples(f, 1)?;
    let len_cv = check_samples(cv, 1)?;
    if f.len() != cv.len() || len != len_cv || cv_mean.len() != len || lambda.len() != len {
        return Err(Error::Shape("control variate inputs differ in shape".into()));
    }
    let mut acc = RunningMean::new();
    let mut tmp = vec![0.0; len];
    for (fs, cs) in f.iter().zip(cv) {
        for i in 0..len {
            tmp[i] = fs[i] - lambda[i] * cs[i];
        }
        acc.push(&tmp)?;
    }
    let mut out = acc.mean()?;
    for i in 0..len {
        out[i] += lambda[i] * cv_mean[i];
    }
    Ok(out)
}

/// Control variate estimate of `E[f]` for the given `λ` rule.
///
/// `m_e = None` means `cv_mean` is exact, so the cost correction is inactive.
pub fn mscv_estimate(
    f: &[Vec<f64>],
    cv: &[Vec<f64>],
    cv_mean: &[f64],
    mode: LambdaMode,
    m_e: Option<usize>,
    moments: Option<MomentSamples<'_>>,
) -> Result<EstimatorResult> {
    let len = check_samples(f, 1)?;
    let m = f.len();
    let mut result = EstimatorResult {
        mean: Vec::new(),
        lambda: None,
        lambda_blocks: None,
        var_cv: None,
        cov: None,
        m,
        m_e,
        mode,
    };
    let lambda = match mode {
        LambdaMode::Zero => {
            result.mean = mc_estimate(f)?;
            return Ok(result);
        }
        LambdaMode::One => vec![1.0; len],
        LambdaMode::Optimal | LambdaMode::CostCorrected => {
            let (var, cov) = var_cov_estimators(f, cv)?;
            let mut l = lambda_from(&var, &cov);
            if mode == LambdaMode::CostCorrected {
                if let Some(me) = m_e {
                    l = lambda_cost_corrected(&l, m, me);
                }
            }
            result.var_cv = Some(var);
            result.cov = Some(cov);
            l
        }
        LambdaMode::OptimalMoment => {
            let mom = moments.ok_or_else(|| {
                Error::Parameter("moment-based lambda needs moment samples".into())
            })?;
            let blocks = lambda_star_moment(mom.f, mom.cv)?;
            if blocks.len() * mom.block_len != len {
                return Err(Error::Shape(format!(
                    "{} moment blocks of length {} do not cover {len} field values",
                    blocks.len(),
                    mom.block_len
                )));
            }
            let l = blocks.iter().flat_map(|&b| std::iter::repeat(b).take(mom.block_len)).collect();
            result.lambda_blocks = Some(blocks);
            l
        }
    };
    result.mean = control_variate_mean(f, cv, cv_mean, &lambda)?;
    result.lambda = Some(lambda);
    Ok(result)
}

/// Homogeneous estimator: the control variate mean is known to quadrature accuracy.
pub fn mscv_estimate_homogeneous(
    f: &[Vec<f64>],
    cv: &[Vec<f64>],
    cv_mean: &[f64],
    mode: LambdaMode,
    moments: Option<MomentSamples<'_>>,
) -> Result<EstimatorResult> {
    mscv_estimate(f, cv, cv_mean, mode, None, moments)
}

/// Space dependent estimator with the control variate mean from an
/// independent fine ensemble of size `m_e`.
///
/// `f_z` and `cv_z` are the random inputs of the two sample sets; they must
/// be the same draws.
#[allow(clippy::too_many_arguments)]
pub fn mscv_estimate_field(
    f: &[Vec<f64>],
    f_z: &[f64],
    cv: &[Vec<f64>],
    cv_z: &[f64],
    cv_fine_mean: &[f64],
    m_e: usize,
    mode: LambdaMode,
    moments: Option<MomentSamples<'_>>,
) -> Result<EstimatorResult> {
    let paired = f_z.len() == cv_z.len()
        && f_z.len() == f.len()
        && cv.len() == cv_z.len()
        && f_z.iter().zip(cv_z).all(|(a, b)| a.to_bits() == b.to_bits());
    if !paired {
        return Err(Error::Contract(
            "control variate samples must reuse the kinetic samples' random inputs".into(),
        ));
    }
    mscv_estimate(f, cv, cv_fine_mean, mode, Some(m_e), moments)
}

/// Cost model of one kinetic solve relative to its control variates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub n_a: u64,
    pub n_v: u64,
    #[serde(default = "default_n_x")]
    pub n_x: u64,
    #[serde(default = "default_d_v")]
    pub d_v: u32,
    #[serde(default = "default_d_x")]
    pub d_x: u32,
    #[serde(default = "default_samples")]
    pub samples: u64,
}

fn default_n_x() -> u64 {
    100
}
fn default_d_v() -> u32 {
    2
}
fn default_d_x() -> u32 {
    1
}
fn default_samples() -> u64 {
    10
}

impl CostModel {
    /// Constants of the reference experiments: `C/C1 = 1.25`, `C/C2 = 1`, `N_a = 8`, `N_v = 32`.
    pub fn reference() -> Self {
        Self { c: 1.25, c1: 1.0, c2: 1.25, n_a: 8, n_v: 32, n_x: 100, d_v: 2, d_x: 1, samples: 10 }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.c > 0.0 && self.c1 > 0.0 && self.c2 > 0.0;
        if !positive || self.n_a == 0 || self.n_v == 0 || self.n_x == 0 || self.d_v == 0 {
            return Err(Error::Config("cost model constants must be positive".into()));
        }
        Ok(())
    }
}

/// Fine ensemble sizes `(M_E1, M_E2)` for the BGK and Euler control variates.
pub fn allocate_samples(cost: &CostModel, m: u64) -> Result<(u64, u64)> {
    cost.validate()?;
    let nv_d = (cost.n_v as f64).powi(cost.d_v as i32);
    let log_term = nv_d.log2();
    let angular = (cost.n_a as f64).powi(cost.d_v as i32 - 1);
    let m = m as f64;
    let me1 = m * (cost.c / cost.c1) * angular * log_term;
    let me2 = m * (cost.c / cost.c2) * angular * nv_d * log_term;
    // Tolerate rounding just below an integer.
    let down = |x: f64| (x * (1.0 + 1e-12)).floor() as u64;
    Ok((down(me1), down(me2)))
}

/// Correlation and variance reduction of a scalar control variate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport {
    /// Empirical correlation; `None` if either variable has zero variance.
    pub rho: Option<f64>,
    /// `1 - ρ²`.
    pub predicted_factor: f64,
    /// `Var_M(f - λ*(cv - E_M[cv])) / Var_M(f)`.
    pub observed_factor: f64,
    pub lambda: f64,
}

pub fn variance_reduction_report(f: &[f64], cv: &[f64]) -> Result<VarianceReport> {
    if f.len() != cv.len() {
        return Err(Error::Shape("scalar samples differ in length".into()));
    }
    if f.len() < 2 {
        return Err(Error::Parameter("at least 2 samples are required".into()));
    }
    let m = f.len() as f64;
    let fm = f.iter().sum::<f64>() / m;
    let cm = cv.iter().sum::<f64>() / m;
    let (mut vf, mut vc, mut c) = (0.0, 0.0, 0.0);
    for (a, b) in f.iter().zip(cv) {
        vf += (a - fm) * (a - fm);
        vc += (b - cm) * (b - cm);
        c += (a - fm) * (b - cm);
    }
    if vf == 0.0 || vc == 0.0 {
        return Ok(VarianceReport { rho: None, predicted_factor: 1.0, observed_factor: 1.0, lambda: 0.0 });
    }
    let rho = c / (vf * vc).sqrt();
    let lambda = c / vc;
    let resid: Vec<f64> = f.iter().zip(cv).map(|(a, b)| a - lambda * (b - cm)).collect();
    let rm = resid.iter().sum::<f64>() / m;
    let vr: f64 = resid.iter().map(|r| (r - rm) * (r - rm)).sum();
    Ok(VarianceReport { rho: Some(rho), predicted_factor: 1.0 - rho * rho, observed_factor: vr / vf, lambda })
}
