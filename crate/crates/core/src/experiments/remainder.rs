use serde_json::Value;

use super::common::{column, est_value, estimate, method_for, method_label, per_path, stream, ReportBuilder};
use super::config::ExperimentConfig;
use crate::energy::{dot, GramContext};
use crate::error::{Error, Result};
use crate::gaussian::{sample_ensemble, Method, ObservablePlan, RngStream};
use crate::malliavin::{assemble_projection, functional, observables, CylindricalFunctional};
use crate::model::TimeGrid;
use crate::report::{num, Criterion, Report, Table};
use crate::stats::{correlation_with_se, linear_fit};

/// Default offsets `T/2 · 2^-k`, `k = 1..6`.
pub fn default_offsets(horizon: f64) -> Vec<f64> {
    (1..=6).map(|k| horizon / 2.0 * 0.5f64.powi(k)).collect()
}

/// Grid points `t = s + δ` for the offsets that land exactly on the grid.
fn usable_offsets(grid: &TimeGrid, s: usize, offsets: &[f64]) -> Vec<(f64, usize)> {
    let ts = grid.time(s);
    offsets
        .iter()
        .filter_map(|&d| {
            if d <= 0.0 || ts + d > grid.horizon() * (1.0 + 1e-12) {
                return None;
            }
            match grid.nearest_index(ts + d) {
                (i, true) if i > s => Some((d, i)),
                _ => {
                    log::warn!("offset {d} from s = {ts} is not on the grid; dropped");
                    None
                }
            }
        })
        .collect()
}

/// Conditional quantities at the anchor `s` and at each `t = s + δ`.
struct Expansion {
    plan_s: ObservablePlan,
    plans_t: Vec<ObservablePlan>,
    /// `Σ (k_t - k_s)` per offset.
    sigma_incr: Vec<Vec<f64>>,
    /// `<k_{t_i}, d~> / |d~|^2` per offset, `d~ = (Id - P_s)(k_t - k_s)`.
    iso_weights: Vec<Vec<f64>>,
    incr_norm: Vec<f64>,
    targets: Vec<usize>,
    s: usize,
}

impl Expansion {
    fn new(ctx: &GramContext, f: &CylindricalFunctional, s: usize, targets: &[usize]) -> Result<Self> {
        let obs = observables(ctx, f)?;
        let through = |i: usize| ctx.time_prefix(i + 1);
        let plan_s = ObservablePlan::new(ctx, &obs, through(s))?;
        let plans_t = targets
            .iter()
            .map(|&t| ObservablePlan::new(ctx, &obs, through(t)))
            .collect::<Result<Vec<_>>>()?;
        let sigma_obs: Vec<Vec<f64>> = obs.iter().map(|h| ctx.apply_sigma(h)).collect();
        let mut sigma_incr = Vec::new();
        let mut iso_weights = Vec::new();
        let mut incr_norm = Vec::new();
        for &t in targets {
            let inc = ctx.observable_increment(Some(s), t)?;
            let si = ctx.apply_sigma(&inc);
            incr_norm.push(dot(inc.coeffs(), &si));
            let tilde = inc.sub(&ctx.project_adapted(&inc, through(s))?);
            let st = ctx.apply_sigma(&tilde);
            let v = dot(tilde.coeffs(), &st);
            iso_weights.push(sigma_obs.iter().map(|so| dot(tilde.coeffs(), so) / v).collect());
            sigma_incr.push(si);
        }
        Ok(Expansion {
            plan_s,
            plans_t,
            sigma_incr,
            iso_weights,
            incr_norm,
            targets: targets.to_vec(),
            s,
        })
    }

    fn rank(&self) -> usize {
        self.plans_t
            .iter()
            .chain(std::iter::once(&self.plan_s))
            .map(ObservablePlan::rank)
            .max()
            .unwrap_or(0)
    }

    /// `(M_s, E[∇f | F_s], pairing per offset)` for one path.
    fn anchor(
        &self,
        ctx: &GramContext,
        f: &CylindricalFunctional,
        path: &[f64],
        method: &Method,
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let n = f.arity();
        let est = self.plan_s.expect(path, n + 1, method, |y, out| {
            out[0] = f.value(y);
            f.gradient(y, &mut out[1..]);
        })?;
        let ms = est[0].value;
        let cond: Vec<f64> = est[1..].iter().map(|e| e.value).collect();
        let proj = assemble_projection(ctx, &self.plan_s, &cond);
        let p = self.plan_s.observed();
        let pairing = self
            .sigma_incr
            .iter()
            .map(|si| dot(&proj.coeffs()[..p], &si[..p]))
            .collect();
        Ok((ms, cond, pairing))
    }

    fn martingale(&self, k: usize, f: &CylindricalFunctional, path: &[f64], method: &Method) -> Result<f64> {
        Ok(self.plans_t[k].expect(path, 1, method, |y, out| out[0] = f.value(y))?[0].value)
    }
}

fn remainder_grid(cfg: &ExperimentConfig) -> Result<TimeGrid> {
    cfg.grid(cfg.remainder_grid_n.unwrap_or(cfg.grid_n))
}

fn anchor_index(grid: &TimeGrid, t: f64) -> Result<usize> {
    match grid.nearest_index(t) {
        (i, true) => Ok(i),
        _ => Err(Error::Config(format!("anchor time {t} is not a point of grid {grid}"))),
    }
}

/// `E[R_{s,t}^2]` for `R = M_t - M_s - <(Π D F)_s, k_t - k_s>` over dyadic
/// offsets from `s = T/2`, with a log-log fit of the decay.
pub fn run_remainder_scaling(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let model = cfg.covariance_model()?;
    let ctx = GramContext::components(model, remainder_grid(cfg)?)?;
    let grid = ctx.grid().clone();
    let f = functional(&cfg.functional, &grid)?;
    let s = anchor_index(&grid, grid.horizon() / 2.0)?;
    let offsets = if cfg.offsets.is_empty() {
        default_offsets(grid.horizon())
    } else {
        cfg.offsets.clone()
    };
    let usable = usable_offsets(&grid, s, &offsets);
    if usable.len() < 5 {
        return Err(Error::Config(format!(
            "only {} of {} offsets fall on the grid from s = {}; need at least 5",
            usable.len(),
            offsets.len(),
            grid.time(s)
        )));
    }
    let targets: Vec<usize> = usable.iter().map(|u| u.1).collect();
    let ex = Expansion::new(&ctx, &f, s, &targets)?;
    let method = method_for(cfg, ex.rank())?;
    let ens = sample_ensemble(&ctx, cfg.paths, RngStream::new(cfg.seed, stream::REMAINDER))?;
    let rows = per_path(cfg.paths, |i| {
        let path = ens.row(i);
        let m = method.keyed(i as u64);
        let (ms, _, pairing) = ex.anchor(&ctx, &f, path, &m)?;
        (0..targets.len())
            .map(|k| {
                let r = ex.martingale(k, &f, path, &m)? - ms - pairing[k];
                Ok(r * r)
            })
            .collect()
    })?;

    let mut t = Table::new(&[
        "offset",
        "t",
        "remainder_sq",
        "se",
        "increment_norm_sq",
        "increment_variance",
    ]);
    let mut logs = (Vec::new(), Vec::new());
    let mut norm_err: f64 = 0.0;
    for (k, &(d, ti)) in usable.iter().enumerate() {
        let e = estimate(&column(&rows, k));
        let iv = model.increment_variance(grid.time(s), grid.time(ti))?;
        norm_err = norm_err.max((ex.incr_norm[k] - iv).abs() / iv.max(1.0));
        if e.value > 0.0 {
            logs.0.push(d.ln());
            logs.1.push(e.value.ln());
        }
        t.push(vec![
            d.into(),
            grid.time(ti).into(),
            e.value.into(),
            e.se.into(),
            ex.incr_norm[k].into(),
            iv.into(),
        ]);
    }
    let fit = if logs.0.len() >= 2 {
        linear_fit(&logs.0, &logs.1)
    } else {
        crate::stats::LinearFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            r_squared: f64::NAN,
        }
    };
    let reference = 4.0 * model.hurst();

    let mut b = ReportBuilder::new(cfg, "remainder", grid.len());
    b.table(t);
    b.summary("s", num(grid.time(s)));
    b.summary("usable_offsets", Value::from(usable.len()));
    b.summary("slope", num(fit.slope));
    b.summary("intercept", num(fit.intercept));
    b.summary("r_squared", num(fit.r_squared));
    b.summary("reference_exponent", num(reference));
    b.summary("slope_minus_reference", num(fit.slope - reference));
    b.summary("increment_norm_max_rel_error", num(norm_err));
    b.provenance("method", Value::from(method_label(&method)));
    b.provenance("jitter", num(ctx.jitter_applied()));
    b.criterion(Criterion::new(
        "fit_r_squared",
        fit.r_squared >= 0.98,
        format!("R² = {:.5} (threshold 0.98)", fit.r_squared),
    ));
    b.criterion(Criterion::new(
        "slope_finite",
        fit.slope.is_finite(),
        format!("slope {:.4} vs reference {reference:.4}", fit.slope),
    ));
    b.criterion(Criterion::new(
        "increment_norm_identity",
        norm_err <= 1e-12,
        format!("max relative error {norm_err:.3e}"),
    ));
    Ok(b.finish())
}

/// Per anchor `s`: the energy pairing `<(Π D F)_s, k_t - k_s>`, the per-path
/// regression slope `γ_s` of `M_t - M_s` on `X_t - X_s`, and the isonormal
/// candidate `<E[DF | F_s], d~>/|d~|^2 · (X_t - X_s)`, compared as
/// predictors of `M_t - M_s`.
pub fn run_gubinelli_compare(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let model = cfg.covariance_model()?;
    let ctx = GramContext::components(model, remainder_grid(cfg)?)?;
    let grid = ctx.grid().clone();
    let f = functional(&cfg.functional, &grid)?;
    let h = grid.horizon();
    let offsets = if cfg.offsets.is_empty() {
        default_offsets(h)
    } else {
        cfg.offsets.clone()
    };
    let ens = sample_ensemble(&ctx, cfg.paths, RngStream::new(cfg.seed, stream::GUBINELLI))?;

    let mut t = Table::new(&[
        "s",
        "offsets",
        "mean_gamma",
        "mean_gamma_se",
        "mean_isonormal_coeff",
        "corr_pairing_regression",
        "corr_isonormal_regression",
        "rel_err_pairing",
        "rel_err_regression",
        "rel_err_isonormal",
        "mean_pairing",
    ]);
    let mut b = ReportBuilder::new(cfg, "gubinelli", grid.len());
    let mut anchors = 0;
    for frac in [0.25, 0.5, 0.75] {
        let Ok(s) = anchor_index(&grid, frac * h) else {
            log::warn!("anchor {} is not on the grid; skipped", frac * h);
            continue;
        };
        let usable = usable_offsets(&grid, s, &offsets);
        if usable.is_empty() {
            continue;
        }
        anchors += 1;
        let targets: Vec<usize> = usable.iter().map(|u| u.1).collect();
        let ex = Expansion::new(&ctx, &f, s, &targets)?;
        let method = method_for(cfg, ex.rank())?;
        let nk = targets.len();
        // per path: [gamma, iso coeff at smallest offset] then per offset (y, x, pairing, iso)
        let rows = per_path(cfg.paths, |i| {
            let path = ens.row(i);
            let obs = ctx.observe(path);
            let m = method.keyed(i as u64);
            let (ms, cond, pairing) = ex.anchor(&ctx, &f, path, &m)?;
            let mut out = vec![0.0; 2 + 4 * nk];
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for k in 0..nk {
                let y = ex.martingale(k, &f, path, &m)? - ms;
                let x = obs[ex.targets[k]] - obs[ex.s];
                let c = dot(&cond, &ex.iso_weights[k]);
                sxy += x * y;
                sxx += x * x;
                out[2 + 4 * k..6 + 4 * k].copy_from_slice(&[y, x, pairing[k], c * x]);
                if k == 0 {
                    out[1] = c;
                }
            }
            out[0] = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            Ok(out)
        })?;
        let gamma = estimate(&column(&rows, 0));
        let iso_coeff = estimate(&column(&rows, 1));
        let (mut ys, mut pair, mut reg, mut iso) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for r in &rows {
            for k in 0..nk {
                let base = 2 + 4 * k;
                ys.push(r[base]);
                pair.push(r[base + 2]);
                reg.push(r[0] * r[base + 1]);
                iso.push(r[base + 3]);
            }
        }
        let ss: f64 = ys.iter().map(|y| y * y).sum();
        let rel = |pred: &[f64]| -> f64 {
            let e: f64 = ys.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum();
            (e / ss).sqrt()
        };
        let (c_pr, _) = correlation_with_se(&pair, &reg);
        let (c_ir, _) = correlation_with_se(&iso, &reg);
        t.push(vec![
            grid.time(s).into(),
            nk.into(),
            gamma.value.into(),
            gamma.se.into(),
            iso_coeff.value.into(),
            c_pr.into(),
            c_ir.into(),
            rel(&pair).into(),
            rel(&reg).into(),
            rel(&iso).into(),
            estimate(&pair).value.into(),
        ]);
        if frac == 0.5 {
            b.summary("mid_gamma", est_value(gamma));
            b.summary("mid_isonormal_coeff", est_value(iso_coeff));
        }
    }
    if anchors == 0 {
        return Err(Error::Config("no anchor of the Gubinelli sweep has usable offsets".into()));
    }
    b.table(t);
    b.summary("functional", Value::from(cfg.functional.clone()));
    b.summary("anchors", Value::from(anchors));
    b.provenance("jitter", num(ctx.jitter_applied()));
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::AdaptedIndex;

    #[test]
    fn dyadic_offsets_on_a_128_grid() {
        let grid = TimeGrid::uniform(128, 1.0).unwrap();
        let s = anchor_index(&grid, 0.5).unwrap();
        assert_eq!(usable_offsets(&grid, s, &default_offsets(1.0)).len(), 6);
        let coarse = TimeGrid::uniform(64, 1.0).unwrap();
        let s = anchor_index(&coarse, 0.5).unwrap();
        assert_eq!(usable_offsets(&coarse, s, &default_offsets(1.0)).len(), 5);
        assert!(usable_offsets(&coarse, s, &[0.0, 0.7]).is_empty());
    }

    #[test]
    fn anchor_conditions_through_s() {
        let ctx = GramContext::new(crate::model::CovarianceModel::fbm(0.25).unwrap(), TimeGrid::uniform(8, 1.0).unwrap()).unwrap();
        let f = functional("quadratic", ctx.grid()).unwrap();
        let ex = Expansion::new(&ctx, &f, 3, &[4]).unwrap();
        let path = [0.1, 0.4, -0.2, 0.3, 0.9, 0.2, -0.1, 0.5];
        let m = Method::default();
        let (ms, _, _) = ex.anchor(&ctx, &f, &path, &m).unwrap();
        let same = ObservablePlan::new(&ctx, &observables(&ctx, &f).unwrap(), AdaptedIndex::new(4, &ctx).unwrap())
            .unwrap()
            .expect(&path, 1, &m, |y, o| o[0] = f.value(y))
            .unwrap()[0]
            .value;
        assert_eq!(ms, same);
    }
}
