use serde_json::Value;

use super::common::{stream, ReportBuilder};
use super::config::ExperimentConfig;
use crate::energy::GramContext;
use crate::error::Result;
use crate::gaussian::{sample_ensemble, sample_ensemble_circulant, PathEnsemble, RngStream};
use crate::model::CovarianceModel;
use crate::report::{num, Criterion, Report, Table};
use crate::stats::{ks_critical_1pct, ks_normal, Summary};

const SIGMAS: f64 = 5.0;

struct SamplerStats {
    terminal: (f64, f64),
    increment: (f64, f64),
    ks: f64,
}

fn sampler_stats(ctx: &GramContext, ens: &PathEnsemble, inc: (Option<usize>, usize), terminal_var: f64) -> SamplerStats {
    let last = ctx.grid().len() - 1;
    let mut xt = Vec::with_capacity(ens.len());
    let mut dx = Vec::with_capacity(ens.len());
    for row in ens.rows() {
        let obs = ctx.observe(row);
        xt.push(obs[last]);
        dx.push(obs[inc.1] - inc.0.map_or(0.0, |i| obs[i]));
    }
    SamplerStats {
        terminal: Summary::from_slice(&xt).variance_with_se(),
        increment: Summary::from_slice(&dx).variance_with_se(),
        ks: ks_normal(&xt, terminal_var),
    }
}

/// Samples the configured model on `sampler_grid_n` points with the Cholesky
/// sampler and, for pure fBM/BM on a uniform grid, the circulant sampler, and
/// cross-checks their marginals. Returns the Cholesky ensemble too.
pub fn simulate_with_ensemble(cfg: &ExperimentConfig) -> Result<(Report, PathEnsemble)> {
    cfg.validate()?;
    let model = cfg.covariance_model()?;
    let grid = cfg.grid(cfg.sampler_grid_n)?;
    let ctx = GramContext::components(model, grid.clone())?;
    let n = grid.len();
    let horizon_t = grid.time(n - 1);
    let terminal_var = model.covariance(horizon_t, horizon_t)?;
    let inc = if n >= 2 { (Some(n / 2 - 1), n / 2) } else { (None, 0) };
    let inc_var = model.increment_variance(inc.0.map_or(0.0, |i| grid.time(i)), grid.time(inc.1))?;

    let chol = sample_ensemble(&ctx, cfg.paths, RngStream::new(cfg.seed, stream::SIMULATE_CHOLESKY))?;
    let mut samplers = vec![("cholesky", sampler_stats(&ctx, &chol, inc, terminal_var), false)];
    let circulant_ok = !matches!(model, CovarianceModel::Mixed { .. }) && grid.is_uniform();
    if circulant_ok {
        let (ens, info) = sample_ensemble_circulant(
            &model,
            &grid,
            cfg.paths,
            RngStream::new(cfg.seed, stream::SIMULATE_CIRCULANT),
        )?;
        samplers.push(("circulant", sampler_stats(&ctx, &ens, inc, terminal_var), info.fell_back));
    } else {
        log::info!("circulant sampler skipped (mixed model or non-uniform grid)");
    }

    let crit = ks_critical_1pct(cfg.paths);
    let mut t = Table::new(&[
        "sampler",
        "terminal_variance",
        "terminal_variance_se",
        "terminal_variance_theory",
        "increment_variance",
        "increment_variance_se",
        "increment_variance_theory",
        "ks_statistic",
        "ks_critical_1pct",
        "fell_back",
    ]);
    let mut inc_ok = true;
    let mut ks_ok = true;
    for (name, s, fell_back) in &samplers {
        inc_ok &= (s.increment.0 - inc_var).abs() <= SIGMAS * s.increment.1;
        ks_ok &= s.ks < crit;
        t.push(vec![
            (*name).into(),
            s.terminal.0.into(),
            s.terminal.1.into(),
            terminal_var.into(),
            s.increment.0.into(),
            s.increment.1.into(),
            inc_var.into(),
            s.ks.into(),
            crit.into(),
            (*fell_back).into(),
        ]);
    }

    let mut b = ReportBuilder::new(cfg, "simulate", n);
    b.table(t);
    b.summary("samplers", Value::from(samplers.len()));
    b.provenance("jitter", num(ctx.jitter_applied()));
    if let [(_, a, _), (_, c, _)] = samplers.as_slice() {
        let diff = a.terminal.0 - c.terminal.0;
        let joint = a.terminal.1.hypot(c.terminal.1);
        b.summary("terminal_variance_difference", num(diff));
        b.summary("terminal_variance_joint_se", num(joint));
        b.criterion(Criterion::new(
            "samplers_agree_5se",
            diff.abs() <= SIGMAS * joint,
            format!("terminal variance difference {diff:.3e}, joint SE {joint:.3e}"),
        ));
    }
    b.criterion(Criterion::new(
        "increment_variance_5se",
        inc_ok,
        format!("increment variance theory {inc_var:.6e}"),
    ));
    b.criterion(Criterion::new(
        "terminal_ks_1pct",
        ks_ok,
        format!("KS statistic below the 1% critical value {crit:.4e}"),
    ));
    Ok((b.finish(), chol))
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Report> {
    simulate_with_ensemble(cfg).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_simulation_passes() {
        let cfg = ExperimentConfig {
            paths: 20_000,
            sampler_grid_n: 16,
            ..Default::default()
        };
        let (r, ens) = simulate_with_ensemble(&cfg).unwrap();
        assert_eq!(ens.len(), 20_000);
        assert_eq!(ens.dim(), 16);
        assert!(r.passed(), "{:?}", r.criteria);
        assert_eq!(r.criteria.len(), 3);
    }

    #[test]
    fn mixed_uses_cholesky_only() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("model", "mixed").unwrap();
        cfg.paths = 5000;
        cfg.sampler_grid_n = 8;
        let (r, ens) = simulate_with_ensemble(&cfg).unwrap();
        assert_eq!(ens.dim(), 16);
        assert_eq!(r.criteria.len(), 2);
        assert!(r.passed(), "{:?}", r.criteria);
    }
}
