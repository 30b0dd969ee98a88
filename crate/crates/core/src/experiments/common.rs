use serde_json::{Map, Value};

use super::config::{ExperimentConfig, MethodChoice};
use crate::error::{Error, Result};
use crate::gaussian::{Estimate, Method, RngStream, MAX_QUADRATURE_DIM};
use crate::par::map_range;
use crate::report::{num, Criterion, Report, Table};
use crate::stats::Summary;

/// Stream ids; every experiment draws from its own streams so that runs do
/// not depend on which other experiments ran before.
pub(crate) mod stream {
    pub const SIMULATE_CHOLESKY: u64 = 1;
    pub const SIMULATE_CIRCULANT: u64 = 2;
    pub const ADJOINTNESS: u64 = 3;
    pub const ISOMETRY: u64 = 4;
    pub const FACTORIZATION: u64 = 5;
    pub const REMAINDER: u64 = 6;
    pub const GUBINELLI: u64 = 7;
    pub const LEMMA: u64 = 8;
    pub const INCREMENTS: u64 = 9;
    pub const NESTED: u64 = 10;

    /// Sub-stream `k` of a base id.
    pub fn sub(base: u64, k: u64) -> u64 {
        (base << 16) | k
    }
}

/// Slack added to `3·SE` bands so exactly-zero estimates with zero SE pass.
pub const ABS_FLOOR: f64 = 1e-12;

pub(crate) fn estimate(xs: &[f64]) -> Estimate {
    let s = Summary::from_slice(xs);
    Estimate {
        value: s.mean,
        se: if xs.len() > 1 { s.se() } else { 0.0 },
    }
}

pub(crate) fn within(diff: f64, se: f64, k: f64) -> bool {
    diff.abs() <= k * se + ABS_FLOOR
}

/// Per-path map, in path order, stopping at the first error.
pub(crate) fn per_path<T, F>(m: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Send + Sync,
{
    map_range(m, f).into_iter().collect()
}

/// Column `k` of per-path rows.
pub(crate) fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

pub(crate) fn quadrature(cfg: &ExperimentConfig) -> Method {
    Method::quadrature(cfg.gh_nodes)
}

pub(crate) fn monte_carlo(cfg: &ExperimentConfig) -> Method {
    Method::monte_carlo(cfg.mc_samples, RngStream::new(cfg.seed, stream::NESTED))
}

/// Conditional-expectation method for a problem of conditional rank `rank`.
pub(crate) fn method_for(cfg: &ExperimentConfig, rank: usize) -> Result<Method> {
    match cfg.method {
        MethodChoice::MonteCarlo => Ok(monte_carlo(cfg)),
        MethodChoice::Quadrature if rank > MAX_QUADRATURE_DIM => Err(Error::Unsupported(format!(
            "conditional dimension {rank} exceeds {MAX_QUADRATURE_DIM} for quadrature; set method = mc or auto"
        ))),
        MethodChoice::Auto if rank > MAX_QUADRATURE_DIM => {
            log::warn!("conditional dimension {rank}: using nested Monte Carlo with {} samples", cfg.mc_samples);
            Ok(monte_carlo(cfg))
        }
        _ => Ok(quadrature(cfg)),
    }
}

pub(crate) fn method_label(m: &Method) -> &'static str {
    match m {
        Method::Quadrature(_) => "quadrature",
        Method::MonteCarlo { .. } => "mc",
    }
}

pub(crate) fn est_value(e: Estimate) -> Value {
    let mut m = Map::new();
    m.insert("value".into(), num(e.value));
    m.insert("se".into(), num(e.se));
    Value::Object(m)
}

/// Builder shared by all experiments.
pub(crate) struct ReportBuilder {
    report: Report,
}

impl ReportBuilder {
    pub fn new(cfg: &ExperimentConfig, experiment: &str, grid_n: usize) -> Self {
        let mut provenance = Map::new();
        provenance.insert("crate".into(), Value::from("roughcalc"));
        provenance.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        provenance.insert("rng".into(), Value::from("chacha8, seed + stream id, 256-path chunks"));
        ReportBuilder {
            report: Report {
                experiment: experiment.to_string(),
                model: cfg.model_tag(),
                hurst: cfg.effective_hurst(),
                grid_n,
                seed: cfg.seed,
                // results do not depend on the worker count, so it stays out of the echo
                config: cfg.to_pairs().into_iter().filter(|(k, _)| k != "workers").collect(),
                table: Table::default(),
                summary: Map::new(),
                provenance,
                criteria: Vec::new(),
            },
        }
    }

    pub fn table(&mut self, t: Table) {
        self.report.table = t;
    }

    pub fn summary(&mut self, k: &str, v: Value) {
        self.report.summary.insert(k.to_string(), v);
    }

    pub fn provenance(&mut self, k: &str, v: Value) {
        self.report.provenance.insert(k.to_string(), v);
    }

    pub fn criterion(&mut self, c: Criterion) {
        if !c.passed {
            log::warn!("{}: criterion {} failed: {}", self.report.experiment, c.id, c.detail);
        }
        self.report.criteria.push(c);
    }

    pub fn finish(self) -> Report {
        self.report
    }
}
