use serde_json::Value;

use super::common::{column, estimate, method_for, method_label, per_path, quadrature, stream, ReportBuilder};
use super::config::ExperimentConfig;
use crate::energy::GramContext;
use crate::error::{Error, Result};
use crate::gaussian::{sample_ensemble, Estimate, RngStream, MAX_QUADRATURE_DIM};
use crate::malliavin::{expectation, functional, ClarkIntegrand, CylindricalFunctional};
use crate::report::{num, Criterion, Report, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationPoint {
    pub grid_n: usize,
    /// `E[(F - E[F] - δ(Π D F))^2]`
    pub residual: Estimate,
    /// Mean of `F - E[F] - δ(Π D F)`.
    pub bias: Estimate,
    pub expectation: f64,
    /// `exact` (quadrature) or `sample` (ensemble mean).
    pub mean_source: &'static str,
    pub method: &'static str,
    pub jitter: f64,
    pub coupled_slots: usize,
}

/// Residual of the discrete Clark–Ocone factorization on one grid.
pub fn factorization_point(
    ctx: &GramContext,
    f: &CylindricalFunctional,
    cfg: &ExperimentConfig,
    m: usize,
    stream_id: u64,
) -> Result<FactorizationPoint> {
    let mut clark = ClarkIntegrand::new(ctx, f, quadrature(cfg))?;
    let method = method_for(cfg, clark.max_rank())?;
    let label = method_label(&method);
    clark.set_method(method);
    let ens = sample_ensemble(ctx, m, RngStream::new(cfg.seed, stream_id))?;
    let rows = per_path(m, |i| {
        let path = ens.row(i);
        let value = f.on_path(&ctx.observe(path));
        Ok(vec![value, clark.divergence_keyed(path, i as u64)?])
    })?;
    let values = column(&rows, 0);
    let (mean, mean_source) = if f.arity() <= MAX_QUADRATURE_DIM {
        (expectation(ctx, f, &quadrature(cfg))?.value, "exact")
    } else {
        (estimate(&values).value, "sample")
    };
    let resid: Vec<f64> = rows.iter().map(|r| r[0] - mean - r[1]).collect();
    let sq: Vec<f64> = resid.iter().map(|r| r * r).collect();
    Ok(FactorizationPoint {
        grid_n: ctx.grid().len(),
        residual: estimate(&sq),
        bias: estimate(&resid),
        expectation: mean,
        mean_source,
        method: label,
        jitter: ctx.jitter_applied(),
        coupled_slots: clark.coupled_slots(),
    })
}

pub(crate) fn factorization_table(points: &[FactorizationPoint]) -> Table {
    let mut t = Table::new(&[
        "grid_n",
        "residual",
        "se",
        "jitter",
        "bias",
        "bias_se",
        "expectation",
        "mean_source",
        "method",
        "coupled_slots",
    ]);
    for p in points {
        t.push(vec![
            p.grid_n.into(),
            p.residual.value.into(),
            p.residual.se.into(),
            p.jitter.into(),
            p.bias.value.into(),
            p.bias.se.into(),
            p.expectation.into(),
            p.mean_source.into(),
            p.method.into(),
            p.coupled_slots.into(),
        ]);
    }
    t
}

/// Factorization residual over the configured grid sweep.
pub fn run_factorization(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    if cfg.grid_sweep.is_empty() {
        return Err(Error::Config("grid_sweep is empty".into()));
    }
    let model = cfg.covariance_model()?;
    let mut points = Vec::new();
    let mut snapped = false;
    for (k, &n) in cfg.grid_sweep.iter().enumerate() {
        let grid = cfg.grid(n)?;
        let ctx = GramContext::components(model, grid)?;
        let f = functional(&cfg.functional, ctx.grid())?;
        let h = ctx.grid().horizon();
        snapped |= [h, h / 2.0].iter().any(|&t| !ctx.grid().nearest_index(t).1);
        points.push(factorization_point(&ctx, &f, cfg, cfg.paths, stream::sub(stream::FACTORIZATION, k as u64))?);
    }
    let res: Vec<f64> = points.iter().map(|p| p.residual.value).collect();
    let decreasing = res.windows(2).all(|w| w[1] < w[0]);
    let halved = res.len() >= 2 && res[res.len() - 1] < res[0] / 2.0;

    let mut b = ReportBuilder::new(cfg, "factorization", *cfg.grid_sweep.iter().max().unwrap_or(&cfg.grid_n));
    b.table(factorization_table(&points));
    b.summary("functional", Value::from(cfg.functional.clone()));
    b.summary("strictly_decreasing", Value::from(decreasing));
    b.summary("last_below_half_first", Value::from(halved));
    b.summary("max_residual", num(res.iter().cloned().fold(0.0, f64::max)));
    b.summary("times_snapped", Value::from(snapped));
    b.criterion(Criterion::new(
        "residual_nonnegative",
        res.iter().all(|&r| r >= 0.0),
        "",
    ));
    let brownian = model.components().iter().all(|c| c.model.hurst() == 0.5);
    if cfg.functional == "linear" && brownian && !snapped {
        let worst = res.iter().cloned().fold(0.0, f64::max);
        b.criterion(Criterion::new(
            "brownian_linear_exact",
            worst <= 1e-20,
            format!("max residual {worst:.3e} (tolerance 1e-20)"),
        ));
    }
    if cfg.functional == "quadratic" && res.len() >= 2 {
        b.criterion(Criterion::new(
            "refinement_strictly_decreasing",
            decreasing,
            res.iter().map(|r| format!("{r:.4e}")).collect::<Vec<_>>().join(" > "),
        ));
        b.criterion(Criterion::new(
            "refinement_halves",
            halved,
            format!("last {:.4e} vs first/2 {:.4e}", res[res.len() - 1], res[0] / 2.0),
        ));
    }
    Ok(b.finish())
}
