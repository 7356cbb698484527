//! `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Unknown keys are errors. Lists are comma-separated.

use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::analytic::GroupSpec;
use crate::sampler::CloneMode;

/// How `noise_param` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    /// `noise_param` is the per-clone standard deviation σ.
    StdDev,
    /// `noise_param` is the per-clone variance σ².
    Variance,
}

impl NoiseConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseConvention::StdDev => "std_dev",
            NoiseConvention::Variance => "variance",
        }
    }

    /// Per-clone variance implied by `param` under this convention.
    pub fn variance(self, param: f64) -> f64 {
        match self {
            NoiseConvention::StdDev => param * param,
            NoiseConvention::Variance => param,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line in the config file; `None` for command-line overrides.
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}, key '{}': {}", self.key, self.message),
            None => write!(f, "config key '{}': {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Full deterministic identity of an experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub k: usize,
    pub noise_param: f64,
    pub noise_convention: NoiseConvention,
    pub n: u64,
    pub m: u64,
    pub reps: u64,
    pub master_seed: u64,
    pub clone_mode: CloneMode,
    pub group: Option<GroupSpec>,
    pub k_grid: Option<Vec<usize>>,
    pub noise_grid: Option<Vec<f64>>,
    pub ratio_grid: Option<Vec<f64>>,
    pub thetas: Option<Vec<f64>>,
    pub kappa: Option<f64>,
    pub cost_ip_per_step: f64,
    pub cost_ai_per_step: f64,
    pub horizon: Option<u64>,
    /// Set when the seed came from the default rather than the user.
    pub seed_defaulted: bool,
}

/// Desk-scale defaults: quick enough for CI.
pub const DESK_REPS: u64 = 200;
pub const DESK_N: u64 = 2000;
/// Paper-scale preset.
pub const PAPER_REPS: u64 = 1000;
pub const PAPER_N: u64 = 10_000;

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k: 1,
            noise_param: 0.05,
            noise_convention: NoiseConvention::StdDev,
            n: DESK_N,
            m: 2,
            reps: DESK_REPS,
            master_seed: 0,
            clone_mode: CloneMode::PerInteraction,
            group: None,
            k_grid: None,
            noise_grid: None,
            ratio_grid: None,
            thetas: None,
            kappa: None,
            cost_ip_per_step: 0.005,
            cost_ai_per_step: 0.0,
            horizon: None,
            seed_defaulted: true,
        }
    }
}

const KEYS: &[&str] = &[
    "k",
    "noise_param",
    "noise_convention",
    "n",
    "m",
    "reps",
    "seed",
    "clone_mode",
    "sigma_r2",
    "sigma_p2",
    "k_grid",
    "noise_grid",
    "ratio_grid",
    "thetas",
    "kappa",
    "cost_ip_per_step",
    "cost_ai_per_step",
    "horizon",
];

impl ModelConfig {
    pub fn paper_scale() -> Self {
        ModelConfig {
            reps: PAPER_REPS,
            n: PAPER_N,
            ..Default::default()
        }
    }

    /// Per-clone noise variance σ².
    pub fn noise_variance(&self) -> f64 {
        self.noise_convention.variance(self.noise_param)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError {
            line: None,
            key: key.to_owned(),
            message,
        };
        let value = value.trim();
        match key {
            "k" => self.k = positive_int(value).map_err(err)? as usize,
            "noise_param" => self.noise_param = positive_real(value).map_err(err)?,
            "noise_convention" => {
                self.noise_convention = match value {
                    "std_dev" => NoiseConvention::StdDev,
                    "variance" => NoiseConvention::Variance,
                    other => {
                        return Err(err(format!("expected std_dev or variance, got '{other}'")))
                    }
                }
            }
            "n" => self.n = positive_int(value).map_err(err)?,
            "m" => self.m = positive_int(value).map_err(err)?,
            "reps" => {
                let reps = positive_int(value).map_err(err)?;
                if reps < 2 {
                    return Err(err("reps must be at least 2".into()));
                }
                self.reps = reps;
            }
            "seed" => {
                self.master_seed = value.parse::<u64>().map_err(|_| {
                    err(format!(
                        "expected an unsigned 64-bit integer, got '{value}'"
                    ))
                })?;
                self.seed_defaulted = false;
            }
            "clone_mode" => self.clone_mode = value.parse().map_err(err)?,
            "sigma_r2" => {
                let v = positive_real(value).map_err(err)?;
                let p = self.group.map_or(f64::NAN, |g| g.sigma_p2);
                self.group = Some(GroupSpec {
                    sigma_r2: v,
                    sigma_p2: p,
                });
            }
            "sigma_p2" => {
                let v = positive_real(value).map_err(err)?;
                let r = self.group.map_or(f64::NAN, |g| g.sigma_r2);
                self.group = Some(GroupSpec {
                    sigma_r2: r,
                    sigma_p2: v,
                });
            }
            "k_grid" => {
                self.k_grid = Some(
                    list(value, positive_int)
                        .map_err(err)?
                        .into_iter()
                        .map(|v| v as usize)
                        .collect(),
                )
            }
            "noise_grid" => self.noise_grid = Some(list(value, positive_real).map_err(err)?),
            "ratio_grid" => {
                let ratios = list(value, positive_real).map_err(err)?;
                if ratios.iter().any(|&r| r <= 1.0) {
                    return Err(err("disparity ratios must exceed 1".into()));
                }
                self.ratio_grid = Some(ratios)
            }
            "thetas" => self.thetas = Some(list(value, real).map_err(err)?),
            "kappa" => self.kappa = Some(nonnegative_real(value).map_err(err)?),
            "cost_ip_per_step" => self.cost_ip_per_step = nonnegative_real(value).map_err(err)?,
            "cost_ai_per_step" => self.cost_ai_per_step = nonnegative_real(value).map_err(err)?,
            "horizon" => self.horizon = Some(positive_int(value).map_err(err)?),
            other => {
                return Err(ConfigError {
                    line: None,
                    key: other.to_owned(),
                    message: format!("unknown key (valid keys: {})", KEYS.join(", ")),
                })
            }
        }
        Ok(())
    }

    /// Applies every assignment in a config text.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError {
                    line: Some(idx + 1),
                    key: line.to_owned(),
                    message: "expected 'key = value'".into(),
                });
            };
            self.set(key.trim(), value).map_err(|mut e| {
                e.line = Some(idx + 1);
                e
            })?;
        }
        Ok(())
    }

    /// Applies an inline `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(ConfigError {
                line: None,
                key: assignment.to_owned(),
                message: "override must look like key=value".into(),
            });
        };
        self.set(key.trim(), value)
    }

    /// Checks cross-field constraints once all assignments are in.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(g) = self.group {
            if g.sigma_r2.is_nan() || g.sigma_p2.is_nan() {
                return Err(ConfigError {
                    line: None,
                    key: if g.sigma_r2.is_nan() {
                        "sigma_r2"
                    } else {
                        "sigma_p2"
                    }
                    .into(),
                    message: "sigma_r2 and sigma_p2 must be given together".into(),
                });
            }
            if !(g.sigma_r2 < g.sigma_p2) {
                return Err(ConfigError {
                    line: None,
                    key: "sigma_p2".into(),
                    message: format!(
                        "data-poor variance {} must exceed data-rich variance {}",
                        g.sigma_p2, g.sigma_r2
                    ),
                });
            }
        }
        Ok(())
    }

    /// Canonical text: every key in fixed order, floats in shortest
    /// round-trip form. Its hash names the output directory.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("k", self.k.to_string());
        put("noise_param", self.noise_param.to_string());
        put("noise_convention", self.noise_convention.as_str().into());
        put("n", self.n.to_string());
        put("m", self.m.to_string());
        put("reps", self.reps.to_string());
        put("seed", self.master_seed.to_string());
        put("clone_mode", self.clone_mode.as_str().into());
        if let Some(g) = self.group {
            put("sigma_r2", g.sigma_r2.to_string());
            put("sigma_p2", g.sigma_p2.to_string());
        }
        if let Some(g) = &self.k_grid {
            put("k_grid", join(g));
        }
        if let Some(g) = &self.noise_grid {
            put("noise_grid", join(g));
        }
        if let Some(g) = &self.ratio_grid {
            put("ratio_grid", join(g));
        }
        if let Some(g) = &self.thetas {
            put("thetas", join(g));
        }
        if let Some(kappa) = self.kappa {
            put("kappa", kappa.to_string());
        }
        put("cost_ip_per_step", self.cost_ip_per_step.to_string());
        put("cost_ai_per_step", self.cost_ai_per_step.to_string());
        if let Some(h) = self.horizon {
            put("horizon", h.to_string());
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of [`canonical_text`](Self::canonical_text).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn positive_int(v: &str) -> Result<u64, String> {
    match v.parse::<u64>() {
        Ok(0) => Err("must be a positive integer, got 0".into()),
        Ok(x) => Ok(x),
        Err(_) => Err(format!("expected a positive integer, got '{v}'")),
    }
}

fn real(v: &str) -> Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("expected a finite real number, got '{v}'")),
    }
}

fn positive_real(v: &str) -> Result<f64, String> {
    let x = real(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be positive, got {x}"))
    }
}

fn nonnegative_real(v: &str) -> Result<f64, String> {
    let x = real(v)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("must be nonnegative, got {x}"))
    }
}

fn list<T>(v: &str, parse: fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err("list must not be empty".into());
    }
    Ok(items)
}

/// Builds a config from defaults (or the paper-scale preset), an optional
/// file, inline overrides and an optional seed, in that order.
pub fn parse_config(
    path: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
    paper_scale: bool,
) -> Result<ModelConfig, ConfigError> {
    let mut cfg = if paper_scale {
        ModelConfig::paper_scale()
    } else {
        ModelConfig::default()
    };
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| ConfigError {
            line: None,
            key: "--config".into(),
            message: format!("cannot read {}: {e}", p.display()),
        })?;
        cfg.apply_text(&text)?;
    }
    for o in overrides {
        cfg.apply_override(o)?;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
        cfg.seed_defaulted = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_seed_defaults_to_zero() {
        let cfg = parse_config(None, &[], None, false).unwrap();
        assert_eq!(cfg.master_seed, 0);
        assert!(cfg.seed_defaulted);
    }

    #[test]
    fn variance_convention_is_identity() {
        let mut cfg = ModelConfig::default();
        cfg.apply_text("noise_convention = variance\nnoise_param = 0.05\n")
            .unwrap();
        assert_eq!(cfg.noise_variance(), 0.05);
        cfg.set("noise_convention", "std_dev").unwrap();
        assert!((cfg.noise_variance() - 0.0025).abs() < 1e-18);
    }

    #[test]
    fn zero_dimension_rejected_with_line() {
        let e = ModelConfig::default()
            .apply_text("# header\nk = 0\n")
            .unwrap_err();
        assert_eq!(e.line, Some(2));
        assert_eq!(e.key, "k");
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = ModelConfig::default().apply_text("kk = 3").unwrap_err();
        assert_eq!(e.key, "kk");
        assert!(e.message.contains("unknown key"));
        assert!(ModelConfig::default().apply_override("nope=1").is_err());
        assert!(ModelConfig::default().apply_text("just words").is_err());
    }

    #[test]
    fn group_requires_both_variances_in_order() {
        assert!(parse_config(None, &["sigma_r2=0.01".into()], None, false).is_err());
        assert!(parse_config(
            None,
            &["sigma_r2=0.04".into(), "sigma_p2=0.01".into()],
            None,
            false
        )
        .is_err());
        let cfg = parse_config(
            None,
            &["sigma_r2=0.01".into(), "sigma_p2=0.04".into()],
            None,
            false,
        )
        .unwrap();
        assert_eq!(cfg.group.unwrap().nu_p(), 0.05);
    }

    #[test]
    fn canonical_hash_ignores_formatting() {
        let mut a = ModelConfig::default();
        a.apply_text("k=5\nreps = 300   # trailing\n").unwrap();
        let mut b = ModelConfig::default();
        b.apply_text("\n\nreps=300\nk =    5").unwrap();
        assert_eq!(a.hash(), b.hash());
        b.set("seed", "1").unwrap();
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn paper_scale_preset() {
        let cfg = parse_config(None, &[], Some(9), true).unwrap();
        assert_eq!((cfg.reps, cfg.n, cfg.master_seed), (PAPER_REPS, PAPER_N, 9));
    }
}
