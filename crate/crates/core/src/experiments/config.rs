use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uq::LambdaMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::Config(format!("unknown scale '{s}' (expected desk or paper)"))),
        }
    }
}

/// Low fidelity model used as control variate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlVariate {
    None,
    /// Equilibrium of the initial datum (space homogeneous tests).
    Equilibrium,
    /// Exact BGK solution (homogeneous) or BGK field solution (space dependent).
    Bgk,
    /// Compressible Euler solution lifted to moments (space dependent).
    Euler,
}

impl ControlVariate {
    pub const ALL: [ControlVariate; 4] =
        [ControlVariate::None, ControlVariate::Equilibrium, ControlVariate::Bgk, ControlVariate::Euler];

    pub fn name(&self) -> &'static str {
        match self {
            ControlVariate::None => "none",
            ControlVariate::Equilibrium => "equilibrium",
            ControlVariate::Bgk => "bgk",
            ControlVariate::Euler => "euler",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown control variate '{s}'")))
    }
}

/// Collision model of the full (high fidelity) solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FullModel {
    Boltzmann,
    Bgk,
}

/// Error metrics understood by the runner.
///
/// `L{p}s{s}` is the weighted velocity norm `Σ |e|^p (1+|v|^s) Δv²` of the
/// expectation error; `T-L1` and `T-L2` are `Σ |e_T| Δx` and
/// `(Σ e_T² Δx)^{1/2}` for the temperature expectation.
pub const HOMOGENEOUS_NORMS: [&str; 4] = ["L1s0", "L1s2", "L2s0", "L2s2"];
pub const FIELD_NORMS: [&str; 2] = ["T-L1", "T-L2"];

/// Everything that determines one experiment, together with the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub test: u8,
    pub scale: Scale,
    pub model: FullModel,
    pub n_v: usize,
    pub v_max: f64,
    pub n_angles: usize,
    /// Spatial cells; ignored by the space homogeneous tests.
    pub n_x: usize,
    /// Knudsen number; ignored by the space homogeneous tests.
    pub eps: f64,
    /// Fixed step of the homogeneous tests. Space dependent tests use
    /// `min(Δx / (2 v_max), ε)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_final: f64,
    pub report_interval: f64,
    pub samples: usize,
    pub me: usize,
    pub cv: Vec<ControlVariate>,
    pub lambda: Vec<LambdaMode>,
    pub seed: u64,
    /// Amplitude of the random perturbation.
    pub s: f64,
    pub reference_nodes: usize,
    pub norms: Vec<String>,
}

impl ExperimentConfig {
    pub fn is_homogeneous(&self) -> bool {
        self.test <= 2
    }

    /// Estimator labels in output order: `mc` first, then `cv-lambda` pairs.
    pub fn estimators(&self) -> Vec<(ControlVariate, LambdaMode)> {
        let mut out = Vec::new();
        for &cv in &self.cv {
            if cv == ControlVariate::None {
                continue;
            }
            for &l in &self.lambda {
                if !out.contains(&(cv, l)) {
                    out.push((cv, l));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=5).contains(&self.test) {
            return bad(format!("unknown test {} (expected 1..5)", self.test));
        }
        if self.n_v < 8 || self.n_v % 2 != 0 {
            return bad(format!("n_v must be even and at least 8, got {}", self.n_v));
        }
        if !(self.v_max > 0.0) || !(self.t_final > 0.0) || !(self.report_interval > 0.0) {
            return bad("v_max, t_final and report_interval must be positive".into());
        }
        if self.n_angles < 4 {
            return bad(format!("n_angles must be at least 4, got {}", self.n_angles));
        }
        if self.samples < 2 {
            return bad(format!("at least 2 samples are required, got {}", self.samples));
        }
        if self.me < 1 {
            return bad("me must be positive".into());
        }
        if !(self.s >= 0.0) {
            return bad(format!("perturbation amplitude must be non-negative, got {}", self.s));
        }
        if self.reference_nodes < 2 || self.reference_nodes % 2 != 0 {
            return bad(format!("reference_nodes must be even and at least 2, got {}", self.reference_nodes));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        let allowed: &[&str] = if self.is_homogeneous() { &HOMOGENEOUS_NORMS } else { &FIELD_NORMS };
        if self.norms.is_empty() {
            return bad("at least one norm is required".into());
        }
        for n in &self.norms {
            if !allowed.contains(&n.as_str()) {
                return bad(format!("norm '{n}' is not available for test {} (allowed: {allowed:?})", self.test));
            }
        }
        if self.is_homogeneous() {
            if self.dt.is_none() {
                return bad("space homogeneous tests need a fixed dt".into());
            }
            if self.cv.contains(&ControlVariate::Euler) {
                return bad("the euler control variate needs a space dependent test".into());
            }
        } else {
            if self.n_x < 7 {
                return bad(format!("n_x must be at least 7, got {}", self.n_x));
            }
            if !(self.eps > 0.0) {
                return bad(format!("eps must be positive, got {}", self.eps));
            }
            if self.cv.contains(&ControlVariate::Equilibrium) {
                return bad("the equilibrium control variate needs a space homogeneous test".into());
            }
        }
        Ok(())
    }
}

/// Default configuration of test `id` at the given scale.
pub fn build_test(id: u8, scale: Scale) -> Result<ExperimentConfig> {
    let paper = scale == Scale::Paper;
    let homogeneous = |s: f64, me: usize| ExperimentConfig {
        test: id,
        scale,
        model: FullModel::Boltzmann,
        n_v: if paper { 64 } else { 32 },
        v_max: 16.0,
        n_angles: 8,
        n_x: 1,
        eps: 1.0,
        dt: Some(0.05),
        t_final: 10.0,
        report_interval: 0.5,
        samples: 10,
        me,
        cv: vec![ControlVariate::Equilibrium, ControlVariate::Bgk],
        lambda: vec![LambdaMode::Optimal],
        seed: 0,
        s,
        reference_nodes: 16,
        norms: vec!["L1s0".into(), "L1s2".into()],
    };
    let field = |s: f64, eps: f64, t_final: f64| ExperimentConfig {
        test: id,
        scale,
        model: if paper { FullModel::Boltzmann } else { FullModel::Bgk },
        n_v: if paper { 32 } else { 16 },
        v_max: 8.0,
        n_angles: 8,
        n_x: if paper { 100 } else { 50 },
        eps,
        dt: None,
        t_final,
        report_interval: t_final / 10.0,
        samples: 10,
        me: 1000,
        cv: if paper {
            vec![ControlVariate::Euler, ControlVariate::Bgk]
        } else {
            vec![ControlVariate::Euler]
        },
        lambda: vec![LambdaMode::OptimalMoment],
        seed: 0,
        s,
        reference_nodes: 16,
        norms: vec!["T-L1".into(), "T-L2".into()],
    };
    let cfg = match id {
        1 => homogeneous(0.2, 100_000),
        2 => homogeneous(0.2, 100_000),
        3 => field(0.25, 1e-2, 0.875),
        4 => field(0.99, 5e-4, 0.875),
        5 => field(0.2, 1e-2, 0.9),
        _ => return Err(Error::Config(format!("unknown test {id} (expected 1..5)"))),
    };
    Ok(cfg)
}

/// A configuration plus the keys that differ from the test defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub overrides: Vec<String>,
}

/// Builds the defaults of the table's `test` (and optional `scale`) and
/// applies every other key on top.
pub fn resolve(table: &toml::Table) -> Result<ResolvedConfig> {
    let test = match table.get("test") {
        Some(toml::Value::Integer(t)) if (1..=255).contains(t) => *t as u8,
        Some(other) => return Err(Error::Config(format!("test must be an integer in 1..5, got {other}"))),
        None => return Err(Error::Config("missing key 'test'".into())),
    };
    let scale = match table.get("scale") {
        Some(toml::Value::String(s)) => Scale::parse(s)?,
        Some(other) => return Err(Error::Config(format!("scale must be a string, got {other}"))),
        None => Scale::Desk,
    };
    let defaults = build_test(test, scale)?;
    let mut merged = toml::Table::try_from(&defaults)
        .map_err(|e| Error::Config(format!("cannot serialize defaults: {e}")))?;
    let mut overrides = Vec::new();
    for (k, v) in table {
        if k == "test" || k == "scale" {
            continue;
        }
        if merged.get(k) != Some(v) {
            overrides.push(k.clone());
        }
        merged.insert(k.clone(), v.clone());
    }
    overrides.sort();
    let config: ExperimentConfig = toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    config.validate()?;
    Ok(ResolvedConfig { config, overrides })
}

/// Parses `key = value` text (TOML).
pub fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| Error::Config(format!("invalid config: {}", e.message())))
}

/// Parses one override value; bare words that are not TOML are taken as strings.
pub fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

pub fn to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_the_test_parameters() {
        let t1 = build_test(1, Scale::Desk).unwrap();
        assert_eq!((t1.s, t1.v_max, t1.n_v, t1.dt), (0.2, 16.0, 32, Some(0.05)));
        assert_eq!(build_test(1, Scale::Paper).unwrap().n_v, 64);
        let t3 = build_test(3, Scale::Paper).unwrap();
        assert_eq!((t3.s, t3.eps, t3.t_final, t3.n_x, t3.n_v, t3.v_max), (0.25, 1e-2, 0.875, 100, 32, 8.0));
        assert_eq!(t3.dt, None);
        let t4 = build_test(4, Scale::Desk).unwrap();
        assert_eq!((t4.s, t4.eps), (0.99, 5e-4));
        assert_eq!(build_test(5, Scale::Desk).unwrap().t_final, 0.9);
        assert!(build_test(9, Scale::Desk).unwrap_err().is_config());
        for id in 1..=5 {
            for scale in [Scale::Desk, Scale::Paper] {
                build_test(id, scale).unwrap().validate().unwrap();
            }
        }
    }

    #[test]
    fn overrides_are_applied_and_recorded() {
        let t = parse_table("test = 3\neps = 1e-3\nsamples = 10\ncv = [\"euler\", \"bgk\"]").unwrap();
        let r = resolve(&t).unwrap();
        assert_eq!(r.config.eps, 1e-3);
        assert_eq!(r.config.cv, vec![ControlVariate::Euler, ControlVariate::Bgk]);
        // `samples = 10` is the default and is not an override.
        assert_eq!(r.overrides, vec!["cv".to_string(), "eps".to_string()]);

        let dt = resolve(&parse_table("test = 3\ndt = 1e-4").unwrap()).unwrap();
        assert_eq!(dt.config.dt, Some(1e-4));
    }

    #[test]
    fn invalid_tables_are_config_errors() {
        for text in [
            "eps = 1.0",
            "test = 9",
            "test = 1\nbogus = 3",
            "test = 1\ncv = [\"euler\"]",
            "test = 3\nnorms = [\"L1s0\"]",
            "test = 1\nsamples = 1",
            "test = 2\nlambda = [\"sometimes\"]",
            "test = 1\nscale = \"huge\"",
        ] {
            let err = resolve(&parse_table(text).unwrap()).unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
        assert!(parse_table("test = ").unwrap_err().is_config());
    }

    #[test]
    fn toml_round_trip() {
        for id in 1..=5 {
            let cfg = build_test(id, Scale::Desk).unwrap();
            let text = to_toml(&cfg).unwrap();
            let back: ExperimentConfig = toml::from_str(&text).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn override_values() {
        assert_eq!(parse_value("1e-3"), toml::Value::Float(1e-3));
        assert_eq!(parse_value("12"), toml::Value::Integer(12));
        assert_eq!(parse_value("euler"), toml::Value::String("euler".into()));
        assert_eq!(parse_value("[\"bgk\"]"), toml::Value::Array(vec![toml::Value::String("bgk".into())]));
    }

    #[test]
    fn estimator_pairs_skip_none() {
        let mut cfg = build_test(1, Scale::Desk).unwrap();
        cfg.cv = vec![ControlVariate::None, ControlVariate::Bgk];
        cfg.lambda = vec![LambdaMode::One, LambdaMode::Optimal];
        assert_eq!(cfg.estimators(), vec![(ControlVariate::Bgk, LambdaMode::One), (ControlVariate::Bgk, LambdaMode::Optimal)]);
    }
}
