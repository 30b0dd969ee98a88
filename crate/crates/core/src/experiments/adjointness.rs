use serde_json::Value;

use super::common::{column, estimate, per_path, stream, within, ReportBuilder};
use super::config::ExperimentConfig;
use crate::energy::GramContext;
use crate::error::Result;
use crate::gaussian::{sample_ensemble, Estimate, RngStream};
use crate::malliavin::{
    derivative_from_gradient, functional, test_fields, AffineField, CylindricalFunctional, DivergencePlan,
    VectorField, CATALOG,
};
use crate::report::{Criterion, Report, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointnessRow {
    pub functional: String,
    pub field: String,
    /// `E[F δ(u)]`
    pub lhs: Estimate,
    /// `E[<DF, u>]`
    pub rhs: Estimate,
    /// Paired difference of the two sides.
    pub diff: Estimate,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenteredRow {
    pub field: String,
    pub mean: Estimate,
    pub passed: bool,
}

/// Monte Carlo check of `E[F δ(u)] = E[<DF, u>]` for every pair of
/// functional and test field, on `m` paths of stream `stream_id`.
pub fn adjointness_core(
    ctx: &GramContext,
    functionals: &[CylindricalFunctional],
    fields: &[AffineField],
    m: usize,
    seed: u64,
    stream_id: u64,
) -> Result<(Vec<AdjointnessRow>, Vec<CenteredRow>)> {
    let ens = sample_ensemble(ctx, m, RngStream::new(seed, stream_id))?;
    let plans = fields
        .iter()
        .map(|u| DivergencePlan::new(ctx, u))
        .collect::<Result<Vec<_>>>()?;
    let (nf, nu) = (functionals.len(), fields.len());
    let rows = per_path(m, |i| {
        let path = ens.row(i);
        let obs = ctx.observe(path);
        let mut out = Vec::with_capacity(nu + 2 * nf * nu);
        let mut coeffs = Vec::with_capacity(nu);
        for (u, plan) in fields.iter().zip(&plans) {
            coeffs.push(u.coefficients(path)?);
            out.push(plan.eval(u, path)?);
        }
        for f in functionals {
            let mut x = vec![0.0; f.arity()];
            f.gather(&obs, &mut x);
            let value = f.value(&x);
            let mut g = vec![0.0; f.arity()];
            f.gradient(&x, &mut g);
            let sdf = ctx.apply_sigma(&derivative_from_gradient(ctx, f, &g));
            for (k, plan) in plans.iter().enumerate() {
                out.push(value * out[k]);
                out.push(plan.pairing(&coeffs[k], &sdf));
            }
        }
        Ok(out)
    })?;

    let centered = fields
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let mean = estimate(&column(&rows, k));
            CenteredRow {
                field: u.name().to_string(),
                passed: within(mean.value, mean.se, 3.0),
                mean,
            }
        })
        .collect();
    let mut out = Vec::with_capacity(nf * nu);
    for (a, f) in functionals.iter().enumerate() {
        for (k, u) in fields.iter().enumerate() {
            let col = nu + 2 * (a * nu + k);
            let l = column(&rows, col);
            let r = column(&rows, col + 1);
            let d: Vec<f64> = l.iter().zip(&r).map(|(x, y)| x - y).collect();
            let diff = estimate(&d);
            out.push(AdjointnessRow {
                functional: f.name().to_string(),
                field: u.name().to_string(),
                lhs: estimate(&l),
                rhs: estimate(&r),
                passed: within(diff.value, diff.se, 3.0),
                diff,
            });
        }
    }
    Ok((out, centered))
}

pub(crate) fn adjointness_table(rows: &[AdjointnessRow]) -> Table {
    let mut t = Table::new(&[
        "functional",
        "field",
        "lhs",
        "lhs_se",
        "rhs",
        "rhs_se",
        "diff",
        "diff_se",
        "passed",
    ]);
    for r in rows {
        t.push(vec![
            r.functional.clone().into(),
            r.field.clone().into(),
            r.lhs.value.into(),
            r.lhs.se.into(),
            r.rhs.value.into(),
            r.rhs.se.into(),
            r.diff.value.into(),
            r.diff.se.into(),
            r.passed.into(),
        ]);
    }
    t
}

/// Catalog functionals plus a constant, instantiated on the context's grid.
pub(crate) fn catalog_with_constant(ctx: &GramContext) -> Result<Vec<CylindricalFunctional>> {
    let mut fs = CATALOG
        .iter()
        .map(|(name, _)| functional(name, ctx.grid()))
        .collect::<Result<Vec<_>>>()?;
    fs.push(CylindricalFunctional::constant(1.0));
    Ok(fs)
}

pub fn run_adjointness(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let ctx = GramContext::components(cfg.covariance_model()?, cfg.main_grid()?)?;
    let fs = catalog_with_constant(&ctx)?;
    let fields = test_fields(&ctx)?;
    let (rows, centered) = adjointness_core(&ctx, &fs, &fields, cfg.paths, cfg.seed, stream::ADJOINTNESS)?;

    let mut b = ReportBuilder::new(cfg, "adjointness", ctx.grid().len());
    b.table(adjointness_table(&rows));
    let worst = rows
        .iter()
        .map(|r| if r.diff.se > 0.0 { r.diff.value.abs() / r.diff.se } else { 0.0 })
        .fold(0.0, f64::max);
    b.summary("pairs", Value::from(rows.len()));
    b.summary("max_abs_z", crate::report::num(worst));
    let cent: serde_json::Map<String, Value> = centered
        .iter()
        .map(|c| (c.field.clone(), super::common::est_value(c.mean)))
        .collect();
    b.summary("divergence_mean", Value::Object(cent));
    b.provenance("jitter", crate::report::num(ctx.jitter_applied()));
    b.criterion(Criterion::new(
        "adjointness_3se",
        rows.iter().all(|r| r.passed),
        format!(
            "{} of {} pairs within 3 SE (max |z| = {worst:.3})",
            rows.iter().filter(|r| r.passed).count(),
            rows.len()
        ),
    ));
    b.criterion(Criterion::new(
        "centered_3se",
        centered.iter().all(|c| c.passed),
        centered
            .iter()
            .map(|c| format!("{}: {:.3e} ± {:.3e}", c.field, c.mean.value, c.mean.se))
            .collect::<Vec<_>>()
            .join("; "),
    ));
    Ok(b.finish())
}
