use serde_json::Value;

use super::common::ReportBuilder;
use super::config::{ExperimentConfig, ModelKind};
use super::{
    run_adjointness, run_factorization, run_gubinelli_compare, run_increment_identity, run_isometry_defect,
    run_mixed, run_projection_lemma, run_remainder_scaling, run_simulate,
};
use crate::error::Result;
use crate::report::{Criterion, Report, Table};

/// Every report of a suite run plus an index report.
#[derive(Debug, Clone)]
pub struct Suite {
    pub reports: Vec<Report>,
    pub summary: Report,
}

impl Suite {
    pub fn passed(&self) -> bool {
        self.summary.passed()
    }
}

fn with(cfg: &ExperimentConfig, pairs: &[(&str, String)]) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    for (k, v) in pairs {
        c.set(k, v)?;
    }
    Ok(c)
}

/// Hurst values to sweep: the configured sweep for fBM, otherwise the model's own.
fn hurst_values(cfg: &ExperimentConfig) -> Vec<Option<f64>> {
    if cfg.model == ModelKind::Fbm && !cfg.hurst_sweep.is_empty() {
        cfg.hurst_sweep.iter().map(|&h| Some(h)).collect()
    } else {
        vec![None]
    }
}

fn at_hurst(cfg: &ExperimentConfig, h: Option<f64>) -> Result<ExperimentConfig> {
    match h {
        Some(h) => with(cfg, &[("hurst", h.to_string())]),
        None => Ok(cfg.clone()),
    }
}

/// Runs the whole verification suite in a fixed order.
pub fn verify_all(cfg: &ExperimentConfig) -> Result<Suite> {
    cfg.validate()?;
    let mut reports = vec![run_increment_identity(cfg)?, run_projection_lemma(cfg)?];
    for h in hurst_values(cfg) {
        reports.push(run_adjointness(&at_hurst(cfg, h)?)?);
    }
    reports.push(run_isometry_defect(cfg)?);
    reports.push(run_factorization(&with(
        cfg,
        &[
            ("model", "bm".into()),
            ("functional", "linear".into()),
            ("grid_sweep", cfg.grid_n.to_string()),
        ],
    )?)?);
    reports.push(run_factorization(cfg)?);
    reports.push(run_remainder_scaling(cfg)?);
    reports.push(run_gubinelli_compare(cfg)?);
    for h in hurst_values(cfg) {
        reports.push(run_simulate(&at_hurst(cfg, h)?)?);
    }
    let mut weights = vec![(cfg.alpha, cfg.beta), (1.0, 0.0), (0.0, 1.0)];
    weights.dedup();
    for (a, b) in weights {
        reports.push(run_mixed(&with(cfg, &[("alpha", a.to_string()), ("beta", b.to_string())])?)?);
    }

    let mut t = Table::new(&["experiment", "report", "criteria", "failed", "passed"]);
    let mut b = ReportBuilder::new(cfg, "verify-all", cfg.grid_n);
    for r in &reports {
        let failed: Vec<&str> = r.failed_criteria().map(|c| c.id.as_str()).collect();
        t.push(vec![
            r.experiment.clone().into(),
            r.file_stem().into(),
            r.criteria.len().into(),
            failed.join(" ").into(),
            r.passed().into(),
        ]);
        b.criterion(Criterion::new(
            r.file_stem(),
            r.passed(),
            if failed.is_empty() {
                String::new()
            } else {
                format!("failed: {}", failed.join(", "))
            },
        ));
    }
    b.table(t);
    b.summary("reports", Value::from(reports.len()));
    b.summary("all_passed", Value::from(reports.iter().all(Report::passed)));
    Ok(Suite {
        reports,
        summary: b.finish(),
    })
}
