use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

use super::common::{stream, ReportBuilder};
use super::config::ExperimentConfig;
use crate::energy::{AdaptedIndex, CMElement, GramContext};
use crate::error::Result;
use crate::gaussian::{conditional_law, RngStream};
use crate::model::CovarianceModel;
use crate::report::{num, Criterion, Report, Table};

pub const LEMMA_TOLERANCE: f64 = 1e-10;
pub const INCREMENT_TOLERANCE: f64 = 1e-12;
const INCREMENT_TRIPLES: usize = 1000;

/// Regression coefficients of `E[I(h) | x_{<j}]` from the conditional law:
/// `c_{<j} + M^T c_{>=j}` with `M = Σ_fp Σ_pp^{-1}`.
fn regression_coeffs(ctx: &GramContext, h: &CMElement, j: usize) -> Result<Vec<f64>> {
    let n = ctx.dim();
    let c = h.coeffs();
    if j == n {
        return Ok(c.to_vec());
    }
    let law = conditional_law(ctx, AdaptedIndex::new(j, ctx)?)?;
    let m = law.mean_map();
    let mut beta: Vec<f64> = c[..j].to_vec();
    for (i, b) in beta.iter_mut().enumerate() {
        for f in 0..n - j {
            *b += m[(f, i)] * c[j + f];
        }
    }
    beta.resize(n, 0.0);
    Ok(beta)
}

fn unit_element(ctx: &GramContext, rng: &mut impl Rng) -> Result<CMElement> {
    let c: Vec<f64> = (0..ctx.dim()).map(|_| StandardNormal.sample(rng)).collect();
    let h = CMElement::new(c);
    let norm = ctx.norm_sq(&h)?.sqrt();
    Ok(h.scaled(1.0 / norm))
}

/// Worst energy-norm gap between `P_j h` and the regression coefficients
/// over `elements` random unit elements and every prefix `j = 0..=N`.
pub fn lemma_discrepancy(ctx: &GramContext, elements: usize, rng: RngStream) -> Result<f64> {
    let mut r = rng.rng();
    let hs = (0..elements)
        .map(|_| unit_element(ctx, &mut r))
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for j in 0..=ctx.dim() {
        let p = AdaptedIndex::new(j, ctx)?;
        for h in &hs {
            let proj = ctx.project_adapted(h, p)?;
            let beta = CMElement::new(regression_coeffs(ctx, h, j)?);
            worst = worst.max(ctx.norm_sq(&proj.sub(&beta))?.max(0.0).sqrt());
        }
    }
    Ok(worst)
}

/// Brownian check `P_j k_T = k_{t_{j-1}}` (zero for `j = 0`).
pub fn brownian_terminal_gap(n: usize, horizon: f64) -> Result<f64> {
    let ctx = GramContext::new(CovarianceModel::Bm, crate::model::TimeGrid::uniform(n, horizon)?)?;
    let kt = ctx.representer(n - 1)?;
    let mut worst: f64 = 0.0;
    for j in 0..=n {
        let proj = ctx.project_adapted(&kt, AdaptedIndex::new(j, &ctx)?)?;
        let target = if j == 0 {
            CMElement::zeros(n)
        } else {
            ctx.representer(j - 1)?
        };
        let gap = proj.sub(&target);
        worst = worst.max(gap.coeffs().iter().fold(0.0f64, |a, x| a.max(x.abs())));
    }
    Ok(worst)
}

pub fn run_projection_lemma(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let grid = cfg.main_grid()?;
    let mut t = Table::new(&["hurst", "elements", "prefixes", "max_energy_gap", "jitter", "passed"]);
    let mut all = true;
    for (k, &h) in cfg.lemma_hurst_sweep.iter().enumerate() {
        let ctx = GramContext::new(CovarianceModel::fbm(h)?, grid.clone())?;
        let gap = lemma_discrepancy(
            &ctx,
            cfg.lemma_elements,
            RngStream::new(cfg.seed, stream::sub(stream::LEMMA, k as u64)),
        )?;
        let ok = gap <= LEMMA_TOLERANCE;
        all &= ok;
        t.push(vec![
            h.into(),
            cfg.lemma_elements.into(),
            (ctx.dim() + 1).into(),
            gap.into(),
            ctx.jitter_applied().into(),
            ok.into(),
        ]);
    }
    let bm_gap = brownian_terminal_gap(grid.len().max(1), grid.horizon())?;

    let mut b = ReportBuilder::new(cfg, "lemma", grid.len());
    b.table(t);
    b.summary("brownian_terminal_gap", num(bm_gap));
    b.criterion(Criterion::new(
        "projection_equals_regression",
        all,
        format!("max energy-norm gap <= {LEMMA_TOLERANCE:e} for every H and prefix"),
    ));
    b.criterion(Criterion::new(
        "brownian_terminal_projection",
        bm_gap <= 1e-12,
        format!("max |P_j k_T - k_(t_j)| = {bm_gap:.3e}"),
    ));
    Ok(b.finish())
}

/// `|R(t,t) - 2R(s,t) + R(s,s) - |t-s|^{2H}|` on random triples.
pub fn run_increment_identity(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let mut r = RngStream::new(cfg.seed, stream::INCREMENTS).rng();
    let horizon = cfg.horizon;
    let mut worst: f64 = 0.0;
    let mut worst_at = (0.0, 0.0, 0.0);
    for _ in 0..INCREMENT_TRIPLES {
        let h: f64 = r.random_range(0.01..0.99);
        let a: f64 = r.random_range(0.0..horizon);
        let b: f64 = r.random_range(0.0..horizon);
        let (s, t) = (a.min(b), a.max(b));
        let expected = (t - s).powf(2.0 * h);
        let got = CovarianceModel::fbm(h)?.increment_variance(s, t)?;
        let err = (got - expected).abs() / expected.max(1.0);
        if err > worst {
            worst = err;
            worst_at = (h, s, t);
        }
    }
    let mut b = ReportBuilder::new(cfg, "increments", 0);
    b.summary("triples", Value::from(INCREMENT_TRIPLES));
    b.summary("max_relative_error", num(worst));
    b.summary("worst_hurst", num(worst_at.0));
    b.summary("worst_s", num(worst_at.1));
    b.summary("worst_t", num(worst_at.2));
    b.criterion(Criterion::new(
        "increment_norm_identity",
        worst <= INCREMENT_TOLERANCE,
        format!("max error {worst:.3e} (tolerance {INCREMENT_TOLERANCE:e})"),
    ));
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeGrid;

    #[test]
    fn lemma_holds_on_small_grid() {
        let ctx = GramContext::new(CovarianceModel::fbm(0.2).unwrap(), TimeGrid::uniform(10, 1.0).unwrap()).unwrap();
        assert!(lemma_discrepancy(&ctx, 10, RngStream::new(1, 0)).unwrap() <= LEMMA_TOLERANCE);
    }

    #[test]
    fn full_prefix_is_identity() {
        let ctx = GramContext::new(CovarianceModel::fbm(0.3).unwrap(), TimeGrid::uniform(5, 1.0).unwrap()).unwrap();
        let h = CMElement::new(vec![1.0, -2.0, 0.5, 0.0, 3.0]);
        assert_eq!(regression_coeffs(&ctx, &h, 5).unwrap(), h.coeffs());
        assert!(regression_coeffs(&ctx, &h, 0).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn brownian_projection_of_terminal() {
        assert!(brownian_terminal_gap(16, 2.0).unwrap() <= 1e-12);
    }

    #[test]
    fn increment_report_passes() {
        let r = run_increment_identity(&ExperimentConfig::default()).unwrap();
        assert!(r.passed());
    }
}
