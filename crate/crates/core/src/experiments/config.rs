//! Plain `key = value` experiment configuration.
//!
//! Blank lines and everything after `#` are ignored. Values may be quoted;
//! lists are comma separated and may be wrapped in `[ ]`. Unknown keys are
//! rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{CovarianceModel, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Bm,
    Fbm,
    Mixed,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Bm => "bm",
            ModelKind::Fbm => "fbm",
            ModelKind::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Uniform,
    Explicit,
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spacing::Uniform => "uniform",
            Spacing::Explicit => "explicit",
        })
    }
}

/// How conditional expectations are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    /// Quadrature when the conditional dimension allows it, else Monte Carlo.
    Auto,
    Quadrature,
    MonteCarlo,
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodChoice::Auto => "auto",
            MethodChoice::Quadrature => "quadrature",
            MethodChoice::MonteCarlo => "mc",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub hurst: f64,
    pub alpha: f64,
    pub beta: f64,
    pub grid_n: usize,
    pub horizon: f64,
    pub spacing: Spacing,
    pub times: Vec<f64>,
    pub functional: String,
    pub paths: usize,
    pub seed: u64,
    pub method: MethodChoice,
    pub mc_samples: usize,
    pub gh_nodes: usize,
    pub grid_sweep: Vec<usize>,
    pub hurst_sweep: Vec<f64>,
    pub lemma_hurst_sweep: Vec<f64>,
    pub lemma_elements: usize,
    /// Grid for the remainder and Gubinelli experiments; `None` uses `grid_n`.
    pub remainder_grid_n: Option<usize>,
    pub sampler_grid_n: usize,
    /// Offsets `t - s`; empty means `T/2 · 2^-k` for `k = 1..6`.
    pub offsets: Vec<f64>,
    pub workers: usize,
    pub export: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::Fbm,
            hurst: 0.25,
            alpha: 1.0,
            beta: 1.0,
            grid_n: 32,
            horizon: 1.0,
            spacing: Spacing::Uniform,
            times: Vec::new(),
            functional: "quadratic".into(),
            paths: 100_000,
            seed: 42,
            method: MethodChoice::Auto,
            mc_samples: 2000,
            gh_nodes: 32,
            grid_sweep: vec![8, 16, 32, 64],
            hurst_sweep: vec![0.25, 0.4],
            lemma_hurst_sweep: vec![0.1, 0.25, 0.4, 0.5],
            lemma_elements: 100,
            remainder_grid_n: Some(128),
            sampler_grid_n: 64,
            offsets: Vec::new(),
            workers: 0,
            export: false,
        }
    }
}

/// Every recognised key, in echo order.
pub const KEYS: &[&str] = &[
    "model",
    "hurst",
    "alpha",
    "beta",
    "grid_n",
    "horizon",
    "spacing",
    "times",
    "functional",
    "paths",
    "seed",
    "method",
    "mc_samples",
    "gh_nodes",
    "grid_sweep",
    "hurst_sweep",
    "lemma_hurst_sweep",
    "lemma_elements",
    "remainder_grid_n",
    "sampler_grid_n",
    "offsets",
    "workers",
    "export",
];

/// Smallest path count accepted for statistical experiments.
pub const MIN_PATHS: usize = 1000;

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let v = v.trim().trim_start_matches('[').trim_end_matches(']');
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

impl ExperimentConfig {
    /// Defaults overridden by the entries of a config text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            cfg.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Apply a single `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = unquote(value);
        match key {
            "model" => {
                self.model = match v.to_ascii_lowercase().as_str() {
                    "bm" => ModelKind::Bm,
                    "fbm" => ModelKind::Fbm,
                    "mixed" => ModelKind::Mixed,
                    other => return Err(Error::Config(format!("model: unknown kind {other:?}"))),
                }
            }
            "hurst" => self.hurst = parse_one(key, v)?,
            "alpha" => self.alpha = parse_one(key, v)?,
            "beta" => self.beta = parse_one(key, v)?,
            "grid_n" => self.grid_n = parse_one(key, v)?,
            "horizon" => self.horizon = parse_one(key, v)?,
            "spacing" => {
                self.spacing = match v {
                    "uniform" => Spacing::Uniform,
                    "explicit" => Spacing::Explicit,
                    other => return Err(Error::Config(format!("spacing: unknown value {other:?}"))),
                }
            }
            "times" => self.times = parse_list(key, v)?,
            "functional" => self.functional = v.to_string(),
            "paths" => self.paths = parse_one(key, v)?,
            "seed" => self.seed = parse_one(key, v)?,
            "method" => {
                self.method = match v {
                    "auto" => MethodChoice::Auto,
                    "quadrature" => MethodChoice::Quadrature,
                    "mc" => MethodChoice::MonteCarlo,
                    other => return Err(Error::Config(format!("method: unknown value {other:?}"))),
                }
            }
            "mc_samples" => self.mc_samples = parse_one(key, v)?,
            "gh_nodes" => self.gh_nodes = parse_one(key, v)?,
            "grid_sweep" => self.grid_sweep = parse_list(key, v)?,
            "hurst_sweep" => self.hurst_sweep = parse_list(key, v)?,
            "lemma_hurst_sweep" => self.lemma_hurst_sweep = parse_list(key, v)?,
            "lemma_elements" => self.lemma_elements = parse_one(key, v)?,
            "remainder_grid_n" => {
                self.remainder_grid_n = match v {
                    "" | "none" => None,
                    n => Some(parse_one(key, n)?),
                }
            }
            "sampler_grid_n" => self.sampler_grid_n = parse_one(key, v)?,
            "offsets" => self.offsets = parse_list(key, v)?,
            "workers" => self.workers = parse_one(key, v)?,
            "export" => self.export = parse_one(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Effective configuration as `(key, value)` text pairs; parsing them
    /// back reproduces `self`.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "model" => self.model.to_string(),
                    "hurst" => self.hurst.to_string(),
                    "alpha" => self.alpha.to_string(),
                    "beta" => self.beta.to_string(),
                    "grid_n" => self.grid_n.to_string(),
                    "horizon" => self.horizon.to_string(),
                    "spacing" => self.spacing.to_string(),
                    "times" => join(&self.times),
                    "functional" => self.functional.clone(),
                    "paths" => self.paths.to_string(),
                    "seed" => self.seed.to_string(),
                    "method" => self.method.to_string(),
                    "mc_samples" => self.mc_samples.to_string(),
                    "gh_nodes" => self.gh_nodes.to_string(),
                    "grid_sweep" => join(&self.grid_sweep),
                    "hurst_sweep" => join(&self.hurst_sweep),
                    "lemma_hurst_sweep" => join(&self.lemma_hurst_sweep),
                    "lemma_elements" => self.lemma_elements.to_string(),
                    "remainder_grid_n" => self.remainder_grid_n.map_or("none".into(), |n| n.to_string()),
                    "sampler_grid_n" => self.sampler_grid_n.to_string(),
                    "offsets" => join(&self.offsets),
                    "workers" => self.workers.to_string(),
                    "export" => self.export.to_string(),
                    _ => unreachable!("key list and echo disagree"),
                };
                (k.to_string(), v)
            })
            .collect()
    }

    /// The echo in config-file syntax.
    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn covariance_model(&self) -> Result<CovarianceModel> {
        match self.model {
            ModelKind::Bm => Ok(CovarianceModel::Bm),
            ModelKind::Fbm => CovarianceModel::fbm(self.hurst),
            ModelKind::Mixed => CovarianceModel::mixed(self.alpha, self.beta, self.hurst),
        }
    }

    /// Hurst index of the configured model (1/2 for Brownian motion).
    pub fn effective_hurst(&self) -> f64 {
        match self.model {
            ModelKind::Bm => 0.5,
            _ => self.hurst,
        }
    }

    /// Model tag used in report names.
    pub fn model_tag(&self) -> String {
        match self.model {
            ModelKind::Mixed => format!("mixed-a{}-b{}", self.alpha, self.beta),
            k => k.to_string(),
        }
    }

    /// Grid with `n` points (uniform), or the explicit time list.
    pub fn grid(&self, n: usize) -> Result<TimeGrid> {
        match self.spacing {
            Spacing::Uniform => TimeGrid::uniform(n, self.horizon),
            Spacing::Explicit => TimeGrid::explicit(self.times.clone(), self.horizon),
        }
    }

    pub fn main_grid(&self) -> Result<TimeGrid> {
        self.grid(self.grid_n)
    }

    /// Basic sanity of values; statistical experiments also need
    /// `paths >= MIN_PATHS`.
    pub fn validate(&self) -> Result<()> {
        self.covariance_model()?;
        self.main_grid()?;
        if self.paths < MIN_PATHS {
            return Err(Error::Config(format!(
                "paths = {} is below the minimum of {MIN_PATHS} for statistical claims",
                self.paths
            )));
        }
        if self.gh_nodes == 0 || self.gh_nodes > 200 {
            return Err(Error::Config("gh_nodes must be in 1..=200".into()));
        }
        if self.mc_samples < 2 {
            return Err(Error::Config("mc_samples must be at least 2".into()));
        }
        if self.grid_sweep.contains(&0) {
            return Err(Error::Config("grid_sweep entries must be positive".into()));
        }
        crate::malliavin::functional(&self.functional, &self.main_grid()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_quotes_and_lists() {
        let cfg = ExperimentConfig::parse(
            "# header\nmodel = \"mixed\"\nhurst = 0.3 # rough\ngrid_sweep = [4, 8]\n\nexport = true\nremainder_grid_n = none\n",
        )
        .unwrap();
        assert_eq!(cfg.model, ModelKind::Mixed);
        assert_eq!(cfg.hurst, 0.3);
        assert_eq!(cfg.grid_sweep, vec![4, 8]);
        assert!(cfg.export);
        assert_eq!(cfg.remainder_grid_n, None);
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("hurst = abc").is_err());
        assert!(ExperimentConfig::parse("just a line").is_err());
        assert!(ExperimentConfig::parse("model = ou").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("offsets", "0.25, 0.125").unwrap();
        cfg.set("times", "0.1,0.5,1").unwrap();
        cfg.set("hurst", "0.1").unwrap();
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.to_pairs().len(), KEYS.len());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.paths = 10;
        assert!(cfg.validate().is_err());
        cfg.paths = 5000;
        cfg.functional = "nope".into();
        assert!(cfg.validate().is_err());
        cfg.functional = "quadratic".into();
        cfg.hurst = 1.2;
        assert!(cfg.validate().is_err());
    }
}
