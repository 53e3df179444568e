//! CSV and manifest files written for every run.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::{to_toml, ExperimentConfig};
use super::run::{ExperimentResult, OBSERVABLES};

pub const ERROR_CURVE_FILE: &str = "error_curve.csv";
pub const LAMBDA_FILE: &str = "lambda_field.csv";
pub const MOMENTS_FILE: &str = "moments.csv";
pub const META_FILE: &str = "meta.json";
pub const CONFIG_FILE: &str = "config.toml";

pub const ERROR_CURVE_HEADER: [&str; 4] = ["time", "estimator", "norm_id", "error"];
pub const LAMBDA_HEADER: [&str; 5] = ["time", "x_index", "v1_index", "v2_index", "lambda"];
pub const MOMENTS_HEADER: [&str; 8] = ["time", "x_index", "rho", "ux", "uy", "E", "T", "sigma_T"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurveRow {
    pub time: f64,
    pub estimator: String,
    pub norm_id: String,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub time: f64,
    pub x_index: i64,
    pub v1_index: i64,
    pub v2_index: i64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsRow {
    pub time: f64,
    pub x_index: i64,
    pub rho: f64,
    pub ux: f64,
    pub uy: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
    #[serde(rename = "sigma_T")]
    pub sigma_t: f64,
}

/// Seventeen significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    Ok(w)
}

pub fn write_error_curves(path: &Path, rows: &[ErrorCurveRow]) -> Result<()> {
    let mut w = writer(path, &ERROR_CURVE_HEADER)?;
    for r in rows {
        w.write_record([num(r.time), r.estimator.clone(), r.norm_id.clone(), num(r.error)]).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_lambda(path: &Path, rows: &[LambdaRow]) -> Result<()> {
    let mut w = writer(path, &LAMBDA_HEADER)?;
    for r in rows {
        w.write_record([
            num(r.time),
            r.x_index.to_string(),
            r.v1_index.to_string(),
            r.v2_index.to_string(),
            num(r.lambda),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_moments(path: &Path, rows: &[MomentsRow]) -> Result<()> {
    let mut w = writer(path, &MOMENTS_HEADER)?;
    for r in rows {
        w.write_record([
            num(r.time),
            r.x_index.to_string(),
            num(r.rho),
            num(r.ux),
            num(r.uy),
            num(r.energy),
            num(r.temperature),
            num(r.sigma_t),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    let found: Vec<String> = r.headers().map_err(io)?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Io(format!("{}: header {found:?}, expected {header:?}", path.display())));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Io(format!("{} line {}: {e}", path.display(), i + 2))))
        .collect()
}

pub fn read_error_curves(path: &Path) -> Result<Vec<ErrorCurveRow>> {
    read(path, &ERROR_CURVE_HEADER)
}

pub fn read_lambda(path: &Path) -> Result<Vec<LambdaRow>> {
    read(path, &LAMBDA_HEADER)
}

pub fn read_moments(path: &Path) -> Result<Vec<MomentsRow>> {
    read(path, &MOMENTS_HEADER)
}

pub fn error_curve_rows(result: &ExperimentResult) -> Vec<ErrorCurveRow> {
    let mut rows = Vec::new();
    for (k, &time) in result.times.iter().enumerate() {
        for c in &result.curves {
            rows.push(ErrorCurveRow { time, estimator: c.estimator.clone(), norm_id: c.norm.clone(), error: c.errors[k] });
        }
    }
    rows
}

pub fn lambda_rows(result: &ExperimentResult) -> Vec<LambdaRow> {
    let Some(series) = result.lambda_source() else { return Vec::new() };
    let mut rows = Vec::new();
    for (&time, r) in result.times.iter().zip(&series.results) {
        match (result.velocity_layout(), &r.lambda_blocks, &r.lambda) {
            (Some(n), None, Some(l)) => {
                for (idx, &lambda) in l.iter().enumerate() {
                    rows.push(LambdaRow { time, x_index: -1, v1_index: (idx / n) as i64, v2_index: (idx % n) as i64, lambda });
                }
            }
            (Some(_), Some(blocks), _) => {
                rows.push(LambdaRow { time, x_index: -1, v1_index: -1, v2_index: -1, lambda: blocks[0] });
            }
            (None, Some(blocks), _) => {
                for (i, &lambda) in blocks.iter().enumerate() {
                    rows.push(LambdaRow { time, x_index: i as i64, v1_index: -1, v2_index: -1, lambda });
                }
            }
            (None, None, Some(l)) => {
                // Pointwise λ over cell observables: report the temperature entry.
                for (i, cell) in l.chunks(OBSERVABLES).enumerate() {
                    rows.push(LambdaRow { time, x_index: i as i64, v1_index: -1, v2_index: -1, lambda: cell[OBSERVABLES - 1] });
                }
            }
            (_, None, None) => {}
        }
    }
    rows
}

pub fn moments_rows(result: &ExperimentResult) -> Vec<MomentsRow> {
    let homogeneous = result.config.is_homogeneous();
    let mut rows = Vec::new();
    for (&time, cells) in result.times.iter().zip(&result.reference.stats) {
        for (i, c) in cells.iter().enumerate() {
            rows.push(MomentsRow {
                time,
                x_index: if homogeneous { -1 } else { i as i64 },
                rho: c.mean[0],
                ux: c.mean[1],
                uy: c.mean[2],
                energy: c.mean[3],
                temperature: c.mean[4],
                sigma_t: c.sigma_t,
            });
        }
    }
    rows
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    config: &'a ExperimentConfig,
    overrides: &'a [String],
    seed: u64,
    version: &'static str,
    git: &'static str,
    wall_time_s: f64,
    config_hash: &'a str,
    z_hash: &'a str,
    samples: usize,
    estimators: Vec<&'a str>,
    lambda_source: Option<&'a str>,
    reference: ReferenceMeta<'a>,
    wall_flux_max: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ReferenceMeta<'a> {
    method: &'static str,
    nodes: usize,
    model: &'static str,
    /// Change of the reference when the node count is halved, per report time.
    node_halving_change: &'a [f64],
    norm: &'a str,
}

pub fn meta_json(result: &ExperimentResult) -> Result<String> {
    let cfg = &result.config;
    let meta = Meta {
        config: cfg,
        overrides: &result.overrides,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        git: option_env!("MSCV_GIT_REV").unwrap_or("unknown"),
        wall_time_s: result.wall_time_s,
        config_hash: &result.config_hash,
        z_hash: &result.z_hash,
        samples: result.z.len(),
        estimators: result.estimators.iter().map(|s| s.label.as_str()).collect(),
        lambda_source: result.lambda_source().map(|s| s.label.as_str()),
        reference: ReferenceMeta {
            method: "gauss-legendre collocation",
            nodes: result.reference.nodes,
            model: match result.reference.model {
                super::config::FullModel::Boltzmann => "boltzmann",
                super::config::FullModel::Bgk => "bgk",
            },
            node_halving_change: &result.reference.error_bar,
            norm: &cfg.norms[0],
        },
        wall_flux_max: result.wall_flux_max,
    };
    serde_json::to_string_pretty(&meta).map_err(io)
}

/// Writes all outputs of a run into `dir` (created if missing).
pub fn write_outputs(dir: &Path, result: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(io)?;
    write_error_curves(&dir.join(ERROR_CURVE_FILE), &error_curve_rows(result))?;
    write_lambda(&dir.join(LAMBDA_FILE), &lambda_rows(result))?;
    write_moments(&dir.join(MOMENTS_FILE), &moments_rows(result))?;
    let mut meta = fs::File::create(dir.join(META_FILE)).map_err(io)?;
    writeln!(meta, "{}", meta_json(result)?).map_err(io)?;
    fs::write(dir.join(CONFIG_FILE), to_toml(&result.config)?).map_err(io)
}
