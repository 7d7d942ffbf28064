//! Run configuration: flat `section.key = value` text, `#` comments.
//!
//! Every key has a documented default, so an empty file is a valid config:
//!
//! | key                      | default      | meaning                                    |
//! |--------------------------|--------------|--------------------------------------------|
//! | manifold.family          | `euclidean`  | `euclidean`, `hyperbolic`, `exponential`, `polynomial` |
//! | manifold.beta            | `1.0`        | growth exponent β (curvature c for `hyperbolic`) |
//! | manifold.dimension       | `3`          | dimension N ≥ 2                            |
//! | manifold.blend_inner     | `0.5`        | start of the pole blend collar             |
//! | manifold.blend_outer     | `1.0`        | end of the pole blend collar               |
//! | density.theta            | `0.0`        | decay exponent of ρ = c(1+r²)^(−θ/2)       |
//! | density.c                | `1.0`        | density amplitude                          |
//! | weight.family            | `power`      | `power` (ψ = r^(2−θ)) or `log` (ψ = γ log²r) |
//! | weight.gamma             | `2.0`        | γ for the log-square weight                |
//! | run.T                    | `1.0`        | time horizon                               |
//! | run.gamma                | `1.0`        | Dirichlet boundary value                   |
//! | run.dt                   | `1e-3`       | time step                                  |
//! | run.dr                   | `0.05`       | radial mesh width                          |
//! | run.R_min                | `8.0`        | smallest exhaustion radius                 |
//! | run.R_levels             | `3`          | number of doubling levels                  |
//! | run.probe_r              | `auto`       | probe radius, or `auto` for h-based choice |
//! | quadrature.tol           | `1e-10`      | adaptive quadrature tolerance              |
//! | probe.max_doublings      | `60`         | divergence-probe doubling cap              |
//! | probe.decay_ratio        | `0.92`       | geometric-tail certificate ratio           |
//! | thresholds.plateau_rel   | `0.05`       | plateau detection, relative change         |
//! | thresholds.plateau_floor | `0.4`        | plateau floor as a fraction of γT          |
//! | thresholds.collapse_ceil | `0.1`        | collapse ceiling as a fraction of γT       |
//! | thresholds.collapse_ratio| `0.7`        | collapse level-to-level ratio              |
//!
//! Unknown keys are rejected rather than ignored, so typos surface as
//! errors with a line number instead of silently running the defaults.

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::criteria::WeightPsi;
use crate::geometry::{Density, ModelManifold, WarpingFamily, WarpingKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `section.key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldFamily {
    Euclidean,
    Hyperbolic,
    Exponential,
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFamily {
    Power,
    LogSquare,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub family: ManifoldFamily,
    pub beta: f64,
    pub dimension: u32,
    pub blend_inner: f64,
    pub blend_outer: f64,
    pub theta: f64,
    pub c: f64,
    pub weight_family: WeightFamily,
    pub weight_gamma: f64,
    pub t_final: f64,
    pub gamma: f64,
    pub dt: f64,
    pub dr: f64,
    pub r_min: f64,
    pub r_levels: u32,
    /// `None` means "auto": pick the largest radius the witness still covers.
    pub probe_r: Option<f64>,
    pub quad_tol: f64,
    pub max_doublings: u32,
    pub decay_ratio: f64,
    pub plateau_rel: f64,
    pub plateau_floor: f64,
    pub collapse_ceil: f64,
    pub collapse_ratio: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: ManifoldFamily::Euclidean,
            beta: 1.0,
            dimension: 3,
            blend_inner: 0.5,
            blend_outer: 1.0,
            theta: 0.0,
            c: 1.0,
            weight_family: WeightFamily::Power,
            weight_gamma: 2.0,
            t_final: 1.0,
            gamma: 1.0,
            dt: 1e-3,
            dr: 0.05,
            r_min: 8.0,
            r_levels: 3,
            probe_r: None,
            quad_tol: 1e-10,
            max_doublings: 60,
            decay_ratio: 0.92,
            plateau_rel: 0.05,
            plateau_floor: 0.4,
            collapse_ceil: 0.1,
            collapse_ratio: 0.7,
        }
    }
}

fn parse_num<T: std::str::FromStr>(
    value: &str,
    line: usize,
    key: &str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        msg: format!("`{value}` is not a valid number"),
    })
}

impl RunConfig {
    /// Apply one `section.key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |msg: &str| ConfigError::BadValue {
            line,
            key: key.to_string(),
            msg: msg.to_string(),
        };
        match key {
            "manifold.family" => {
                self.family = match value {
                    "euclidean" => ManifoldFamily::Euclidean,
                    "hyperbolic" => ManifoldFamily::Hyperbolic,
                    "exponential" => ManifoldFamily::Exponential,
                    "polynomial" => ManifoldFamily::Polynomial,
                    _ => {
                        return Err(bad(
                            "expected euclidean | hyperbolic | exponential | polynomial",
                        ))
                    }
                }
            }
            "manifold.beta" => self.beta = parse_num(value, line, key)?,
            "manifold.dimension" => self.dimension = parse_num(value, line, key)?,
            "manifold.blend_inner" => self.blend_inner = parse_num(value, line, key)?,
            "manifold.blend_outer" => self.blend_outer = parse_num(value, line, key)?,
            "density.theta" => self.theta = parse_num(value, line, key)?,
            "density.c" => self.c = parse_num(value, line, key)?,
            "weight.family" => {
                self.weight_family = match value {
                    "power" => WeightFamily::Power,
                    "log" => WeightFamily::LogSquare,
                    _ => return Err(bad("expected power | log")),
                }
            }
            "weight.gamma" => self.weight_gamma = parse_num(value, line, key)?,
            "run.T" => self.t_final = parse_num(value, line, key)?,
            "run.gamma" => self.gamma = parse_num(value, line, key)?,
            "run.dt" => self.dt = parse_num(value, line, key)?,
            "run.dr" => self.dr = parse_num(value, line, key)?,
            "run.R_min" => self.r_min = parse_num(value, line, key)?,
            "run.R_levels" => self.r_levels = parse_num(value, line, key)?,
            "run.probe_r" => {
                self.probe_r = if value == "auto" {
                    None
                } else {
                    Some(parse_num(value, line, key)?)
                }
            }
            "quadrature.tol" => self.quad_tol = parse_num(value, line, key)?,
            "probe.max_doublings" => self.max_doublings = parse_num(value, line, key)?,
            "probe.decay_ratio" => self.decay_ratio = parse_num(value, line, key)?,
            "thresholds.plateau_rel" => self.plateau_rel = parse_num(value, line, key)?,
            "thresholds.plateau_floor" => self.plateau_floor = parse_num(value, line, key)?,
            "thresholds.collapse_ceil" => self.collapse_ceil = parse_num(value, line, key)?,
            "thresholds.collapse_ratio" => self.collapse_ratio = parse_num(value, line, key)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.dimension < 2 {
            return fail(format!(
                "manifold.dimension = {} but the model requires N >= 2",
                self.dimension
            ));
        }
        if self.theta < 0.0 {
            return fail(format!("density.theta = {} must be >= 0", self.theta));
        }
        if self.c <= 0.0 {
            return fail(format!("density.c = {} must be > 0", self.c));
        }
        match self.family {
            ManifoldFamily::Exponential => {
                if !(self.beta > 0.0 && self.beta <= 2.0) {
                    return fail(format!(
                        "manifold.beta = {} must lie in (0, 2] for the exponential family",
                        self.beta
                    ));
                }
            }
            ManifoldFamily::Polynomial | ManifoldFamily::Hyperbolic => {
                if self.beta <= 0.0 {
                    return fail(format!("manifold.beta = {} must be > 0", self.beta));
                }
            }
            ManifoldFamily::Euclidean => {}
        }
        if !(self.blend_inner >= 0.0 && self.blend_outer >= self.blend_inner) {
            return fail("manifold blend collar must satisfy 0 <= inner <= outer".to_string());
        }
        for (name, v) in [
            ("run.T", self.t_final),
            ("run.gamma", self.gamma.abs()),
            ("run.dt", self.dt),
            ("run.dr", self.dr),
            ("run.R_min", self.r_min),
            ("quadrature.tol", self.quad_tol),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if self.r_levels == 0 {
            return fail("run.R_levels must be at least 1".to_string());
        }
        if let Some(p) = self.probe_r {
            if !(p > 0.0 && p < self.r_min) {
                return fail(format!(
                    "run.probe_r = {p} must lie strictly inside the smallest ball (0, {})",
                    self.r_min
                ));
            }
        }
        if !(self.decay_ratio > 0.0 && self.decay_ratio < 1.0) {
            return fail("probe.decay_ratio must lie in (0, 1)".to_string());
        }
        Ok(())
    }

    pub fn warping_kind(&self) -> WarpingKind {
        match self.family {
            ManifoldFamily::Euclidean => WarpingKind::Euclidean,
            ManifoldFamily::Hyperbolic => WarpingKind::Hyperbolic { c: self.beta },
            ManifoldFamily::Exponential => WarpingKind::ExponentialGrowth {
                beta: self.beta,
                dim: self.dimension,
            },
            ManifoldFamily::Polynomial => WarpingKind::PolynomialGrowth {
                beta: self.beta,
                dim: self.dimension,
            },
        }
    }

    pub fn manifold(&self) -> Arc<ModelManifold> {
        let mut fam = WarpingFamily::new(self.warping_kind());
        fam.blend_inner = self.blend_inner;
        fam.blend_outer = self.blend_outer;
        Arc::new(ModelManifold::new(self.dimension, &fam))
    }

    pub fn density(&self) -> Density {
        Density::power(self.c, self.theta)
    }

    pub fn weight(&self) -> WeightPsi {
        match self.weight_family {
            WeightFamily::Power => WeightPsi::for_theta(self.theta),
            WeightFamily::LogSquare => WeightPsi::LogSquare {
                gamma: self.weight_gamma,
            },
        }
    }

    pub fn r_schedule(&self) -> Vec<f64> {
        (0..self.r_levels)
            .map(|k| self.r_min * f64::powi(2.0, k as i32))
            .collect()
    }
}

/// Parse a config text; `set` overrides (from `--set key=value`) apply after
/// the file, in order, with line number 0 in their error messages.
pub fn parse_config_str(text: &str, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let stripped = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or(ConfigError::Syntax { line })?;
        cfg.set(key.trim(), value.trim(), line)?;
    }
    for (key, value) in overrides {
        cfg.set(key.trim(), value.trim(), 0)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<RunConfig, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_all_defaults() {
        let cfg = parse_config_str("", &[]).unwrap();
        assert_eq!(cfg.dimension, 3);
        assert_eq!(cfg.theta, 0.0);
        assert_eq!(cfg.r_schedule(), vec![8.0, 16.0, 32.0]);
        assert!(cfg.probe_r.is_none());
    }

    #[test]
    fn single_override() {
        let cfg = parse_config_str("density.theta = 3\n", &[]).unwrap();
        assert_eq!(cfg.theta, 3.0);
        assert_eq!(cfg.c, 1.0);
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "\n# a comment\nrun.T = 2.0  # trailing\n\nmanifold.family = polynomial\n";
        let cfg = parse_config_str(text, &[]).unwrap();
        assert_eq!(cfg.t_final, 2.0);
        assert_eq!(cfg.family, ManifoldFamily::Polynomial);
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = parse_config_str("run.T = 1\nrun.bogus = 2\n", &[]).unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "run.bogus");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn dimension_one_rejected() {
        let err = parse_config_str("manifold.dimension = 1\n", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn bad_number_reports_key() {
        let err = parse_config_str("run.dt = fast\n", &[]).unwrap_err();
        match err {
            ConfigError::BadValue { line, key, .. } => {
                assert_eq!(line, 1);
                assert_eq!(key, "run.dt");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn overrides_win_over_file() {
        let cfg = parse_config_str(
            "density.theta = 1\n",
            &[("density.theta".to_string(), "2.5".to_string())],
        )
        .unwrap();
        assert_eq!(cfg.theta, 2.5);
    }

    #[test]
    fn probe_r_auto_and_explicit() {
        let cfg = parse_config_str("run.probe_r = auto\n", &[]).unwrap();
        assert!(cfg.probe_r.is_none());
        let cfg = parse_config_str("run.probe_r = 4\n", &[]).unwrap();
        assert_eq!(cfg.probe_r, Some(4.0));
        let err = parse_config_str("run.probe_r = 9\n", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }
}
