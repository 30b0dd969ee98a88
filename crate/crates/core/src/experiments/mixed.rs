use serde_json::{Map, Value};

use super::adjointness::{adjointness_core, adjointness_table, AdjointnessRow, CenteredRow};
use super::common::{est_value, stream, ReportBuilder};
use super::config::ExperimentConfig;
use super::factorization::{factorization_point, FactorizationPoint};
use crate::energy::GramContext;
use crate::error::Result;
use crate::malliavin::{functional, test_fields};
use crate::model::{CovarianceModel, TimeGrid};
use crate::report::{num, Criterion, Report};

const FUNCTIONALS: [&str; 2] = ["quadratic", "linear"];
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

struct Pipeline {
    adjointness: Vec<AdjointnessRow>,
    factorization: Vec<FactorizationPoint>,
    centered: Vec<CenteredRow>,
    jitter: f64,
}

fn pipeline(model: CovarianceModel, grid: TimeGrid, cfg: &ExperimentConfig) -> Result<Pipeline> {
    let ctx = GramContext::components(model, grid)?;
    let fs = FUNCTIONALS
        .iter()
        .map(|n| functional(n, ctx.grid()))
        .collect::<Result<Vec<_>>>()?;
    let fields = test_fields(&ctx)?;
    let (adjointness, centered) = adjointness_core(&ctx, &fs, &fields, cfg.paths, cfg.seed, stream::ADJOINTNESS)?;
    let factorization = fs
        .iter()
        .enumerate()
        .map(|(k, f)| factorization_point(&ctx, f, cfg, cfg.paths, stream::sub(stream::FACTORIZATION, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Pipeline {
        adjointness,
        factorization,
        centered,
        jitter: ctx.jitter_applied(),
    })
}

fn estimates(p: &Pipeline) -> Vec<f64> {
    let mut v = Vec::new();
    for r in &p.adjointness {
        v.extend([r.lhs.value, r.lhs.se, r.rhs.value, r.rhs.se]);
    }
    for f in &p.factorization {
        v.extend([f.residual.value, f.residual.se, f.expectation]);
    }
    v
}

/// The surviving pure model when one weight of a mixture is zero and the
/// other is one, so that observed values coincide with the pure process.
fn pure_counterpart(model: &CovarianceModel) -> Option<CovarianceModel> {
    let comps = model.components();
    match (model, comps.as_slice()) {
        (CovarianceModel::Mixed { .. }, [c]) if c.weight == 1.0 => Some(c.model),
        _ => None,
    }
}

/// Adjointness and factorization in the direct-sum energy space of
/// `αB + βB^H`; degenerate mixtures are compared with the pure pipeline.
pub fn run_mixed(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let model = CovarianceModel::mixed(cfg.alpha, cfg.beta, cfg.hurst)?;
    let mut cfg = cfg.clone();
    cfg.set("model", "mixed")?;
    let grid = cfg.main_grid()?;
    let mixed = pipeline(model, grid.clone(), &cfg)?;

    let mut b = ReportBuilder::new(&cfg, "mixed", grid.len());
    b.table(adjointness_table(&mixed.adjointness));
    let mut fac = Map::new();
    for (name, p) in FUNCTIONALS.iter().zip(&mixed.factorization) {
        fac.insert(name.to_string(), est_value(p.residual));
    }
    b.summary("factorization_residual", Value::Object(fac));
    b.summary("components", Value::from(model.components().len()));
    b.provenance("jitter", num(mixed.jitter));
    b.criterion(Criterion::new(
        "componentwise_adjointness_3se",
        mixed.adjointness.iter().all(|r| r.passed),
        format!(
            "{} of {} pairs within 3 SE",
            mixed.adjointness.iter().filter(|r| r.passed).count(),
            mixed.adjointness.len()
        ),
    ));
    let cent: Map<String, Value> = mixed
        .centered
        .iter()
        .map(|c| (c.field.clone(), est_value(c.mean)))
        .collect();
    b.summary("divergence_mean", Value::Object(cent));
    b.summary(
        "divergence_mean_within_3se",
        Value::from(mixed.centered.iter().all(|c| c.passed)),
    );
    if cfg.beta == 0.0 {
        let lin = mixed.factorization[1].residual.value;
        b.criterion(Criterion::new(
            "brownian_linear_exact",
            lin <= 1e-20,
            format!("linear residual {lin:.3e}"),
        ));
    }
    if let Some(pure) = pure_counterpart(&model) {
        let reference = pipeline(pure, grid, &cfg)?;
        let (a, r) = (estimates(&mixed), estimates(&reference));
        let gap = if a.len() == r.len() {
            a.iter().zip(&r).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        b.summary("pure_model", Value::from(pure.to_string()));
        b.summary("pure_max_gap", num(gap));
        b.criterion(Criterion::new(
            "matches_pure_pipeline",
            gap <= DEGENERATE_TOLERANCE,
            format!("max gap {gap:.3e} against {pure}"),
        ));
    } else if model.components().len() == 1 {
        log::info!("degenerate mixture with weight != 1; pure comparison skipped");
    }
    Ok(b.finish())
}
