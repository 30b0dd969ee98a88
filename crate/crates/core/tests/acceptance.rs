//! End-to-end acceptance run at full scale. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use roughcalc::experiments::{self, ExperimentConfig};
use roughcalc::par::with_workers;
use roughcalc::report::{write_report, Report};
use roughcalc::{AdaptedIndex, CovarianceModel, GramContext, TimeGrid};
use serde_json::Value;

const INCREMENT_TOL: f64 = 1e-12;
const LEMMA_TOL: f64 = 1e-10;
const SE_BAND: f64 = 3.0;
const SAMPLER_SE_BAND: f64 = 5.0;
const ABS_FLOOR: f64 = 1e-12;
const BROWNIAN_RESIDUAL_TOL: f64 = 1e-20;
const BROWNIAN_PROJECTION_TOL: f64 = 1e-12;
const REMAINDER_R2: f64 = 0.98;
const MIXED_GAP_TOL: f64 = 1e-12;
const PATHS: usize = 100_000;
const GRID_N: usize = 32;

type Outcome = Result<(bool, String), String>;

fn base() -> ExperimentConfig {
    ExperimentConfig {
        paths: PATHS,
        grid_n: GRID_N,
        hurst: 0.25,
        ..Default::default()
    }
}

fn with(mut cfg: ExperimentConfig, pairs: &[(&str, &str)]) -> ExperimentConfig {
    for (k, v) in pairs {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn rows(r: &Report) -> Vec<Value> {
    r.to_value()["results"].as_array().cloned().unwrap_or_default()
}

fn f(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or(f64::NAN)
}

fn within(diff: f64, se: f64, k: f64) -> bool {
    diff.abs() <= k * se + ABS_FLOOR
}

fn c1_increments() -> Outcome {
    let r = experiments::run_increment_identity(&base()).map_err(|e| e.to_string())?;
    let err = f(&Value::Object(r.summary.clone()), "max_relative_error");
    Ok((err <= INCREMENT_TOL, format!("max relative error {err:.3e} over 1000 triples")))
}

fn c2_lemma() -> Outcome {
    let cfg = with(base(), &[("lemma_hurst_sweep", "0.1,0.25,0.4,0.5"), ("lemma_elements", "100")]);
    let r = experiments::run_projection_lemma(&cfg).map_err(|e| e.to_string())?;
    let gaps: Vec<f64> = rows(&r).iter().map(|row| f(row, "max_energy_gap")).collect();
    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    Ok((
        gaps.len() == 4 && worst <= LEMMA_TOL,
        format!("max energy-norm gap {worst:.3e} over 4 H values x 100 elements x 33 prefixes"),
    ))
}

fn c3_adjointness() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for h in ["0.25", "0.4"] {
        let r = experiments::run_adjointness(&with(base(), &[("hurst", h)])).map_err(|e| e.to_string())?;
        let rs = rows(&r);
        let catalog: Vec<&Value> = rs.iter().filter(|row| row["functional"] != "constant").collect();
        let bad = catalog
            .iter()
            .filter(|row| !within(f(row, "diff"), f(row, "diff_se"), SE_BAND))
            .count();
        let zmax = catalog
            .iter()
            .map(|row| f(row, "diff").abs() / f(row, "diff_se").max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        ok &= catalog.len() == 18 && bad == 0;
        detail.push(format!("H={h}: {}/{} pairs within 3 SE, max |z| {zmax:.2}", catalog.len() - bad, catalog.len()));
    }
    Ok((ok, detail.join("; ")))
}

fn c4_quadratic_divergence() -> Outcome {
    let r = experiments::run_isometry_defect(&base()).map_err(|e| e.to_string())?;
    let exact = r.criteria.iter().any(|c| c.id == "terminal_identity_exact" && c.passed);
    let rs = rows(&r);
    let t = rs
        .iter()
        .find(|row| row["field"] == "terminal_affine")
        .ok_or("terminal field missing")?;
    let centered = within(f(t, "divergence_mean"), f(t, "divergence_mean_se"), SE_BAND);
    let (defect, se) = (f(t, "defect"), f(t, "defect_se"));
    let isometry = within(defect - 1.0, se, SE_BAND);
    Ok((
        exact && centered && isometry,
        format!(
            "per-path identity {}, E[δ] = {:.3e} ± {:.3e}, defect {defect:.4} ± {se:.4} vs 1",
            if exact { "exact" } else { "violated" },
            f(t, "divergence_mean"),
            f(t, "divergence_mean_se")
        ),
    ))
}

fn c5_brownian() -> Outcome {
    let cfg = with(base(), &[("model", "bm"), ("functional", "linear"), ("grid_sweep", "32")]);
    let r = experiments::run_factorization(&cfg).map_err(|e| e.to_string())?;
    let residual = rows(&r).iter().map(|row| f(row, "residual")).fold(0.0, f64::max);

    let ctx = GramContext::new(CovarianceModel::Bm, TimeGrid::uniform(GRID_N, 1.0).unwrap()).unwrap();
    let mut gap: f64 = 0.0;
    for t in 0..GRID_N {
        let kt = ctx.representer(t).unwrap();
        for s in 0..=t {
            let p = ctx.project_adapted(&kt, AdaptedIndex::new(s + 1, &ctx).unwrap()).unwrap();
            let ks = ctx.representer(s).unwrap();
            gap = p.sub(&ks).coeffs().iter().fold(gap, |g, x| g.max(x.abs()));
        }
    }
    Ok((
        residual <= BROWNIAN_RESIDUAL_TOL && gap <= BROWNIAN_PROJECTION_TOL,
        format!("linear residual {residual:.3e}, max |P_s k_t - k_s| {gap:.3e}"),
    ))
}

fn c6_refinement() -> Outcome {
    let cfg = with(base(), &[("functional", "quadratic"), ("grid_sweep", "8,16,32,64")]);
    let r = experiments::run_factorization(&cfg).map_err(|e| e.to_string())?;
    let res: Vec<f64> = rows(&r).iter().map(|row| f(row, "residual")).collect();
    let decreasing = res.len() == 4 && res.windows(2).all(|w| w[1] < w[0]);
    let halves = res.len() == 4 && res[3] < res[0] / 2.0;
    Ok((
        decreasing && halves,
        format!(
            "residuals {}",
            res.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(" > ")
        ),
    ))
}

fn c7_remainder() -> Outcome {
    let r = experiments::run_remainder_scaling(&with(base(), &[("functional", "quadratic")])).map_err(|e| e.to_string())?;
    let s = Value::Object(r.summary.clone());
    let (r2, slope, n) = (f(&s, "r_squared"), f(&s, "slope"), rows(&r).len());
    Ok((
        n == 6 && r2 >= REMAINDER_R2 && slope.is_finite(),
        format!("{n} offsets, R² {r2:.5}, slope {slope:.4} (reference 4H = {:.2}, reported only)", 4.0 * 0.25),
    ))
}

fn c8_samplers() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for h in ["0.25", "0.4"] {
        let r = experiments::run_simulate(&with(base(), &[("hurst", h), ("sampler_grid_n", "64")])).map_err(|e| e.to_string())?;
        let rs = rows(&r);
        if rs.len() != 2 {
            return Err(format!("expected two samplers, got {}", rs.len()));
        }
        let diff = f(&rs[0], "terminal_variance") - f(&rs[1], "terminal_variance");
        let joint = f(&rs[0], "terminal_variance_se").hypot(f(&rs[1], "terminal_variance_se"));
        let agree = diff.abs() <= SAMPLER_SE_BAND * joint;
        let inc = rs.iter().all(|row| {
            (f(row, "increment_variance") - f(row, "increment_variance_theory")).abs()
                <= SAMPLER_SE_BAND * f(row, "increment_variance_se")
        });
        ok &= agree && inc;
        detail.push(format!(
            "H={h}: terminal diff {:.2} joint SE, increments {}",
            diff.abs() / joint,
            if inc { "ok" } else { "off" }
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn c9_mixed() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (a, b) in [("1", "0"), ("0", "1")] {
        let r = experiments::run_mixed(&with(base(), &[("alpha", a), ("beta", b)])).map_err(|e| e.to_string())?;
        let gap = f(&Value::Object(r.summary.clone()), "pure_max_gap");
        ok &= gap <= MIXED_GAP_TOL;
        detail.push(format!("(α,β)=({a},{b}) gap {gap:.1e}"));
    }
    let r = experiments::run_mixed(&with(base(), &[("alpha", "1"), ("beta", "1"), ("hurst", "0.25")]))
        .map_err(|e| e.to_string())?;
    let rs = rows(&r);
    let good = rs
        .iter()
        .filter(|row| within(f(row, "diff"), f(row, "diff_se"), SE_BAND))
        .count();
    ok &= !rs.is_empty() && good == rs.len();
    detail.push(format!("α=β=1: {good}/{} adjointness pairs within 3 SE", rs.len()));
    Ok((ok, detail.join("; ")))
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect()
}

fn c10_determinism() -> Outcome {
    let cfg = base();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, workers) in dirs.iter().zip([1, 2]) {
        let suite = with_workers(workers, || experiments::verify_all(&cfg)).map_err(|e| e.to_string())?;
        for r in suite.reports.iter().chain(std::iter::once(&suite.summary)) {
            write_report(r, dir.path()).map_err(|e| e.to_string())?;
        }
    }
    let (a, b) = (files(dirs[0].path()), files(dirs[1].path()));
    let same = !a.is_empty() && a == b;
    Ok((same, format!("{} files compared (workers 1 vs 2)", a.len())))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 increment-norm identity", c1_increments),
        ("2 projection lemma", c2_lemma),
        ("3 adjointness", c3_adjointness),
        ("4 quadratic divergence identity", c4_quadratic_divergence),
        ("5 exact Brownian reduction", c5_brownian),
        ("6 factorization refinement", c6_refinement),
        ("7 remainder scaling", c7_remainder),
        ("8 sampler cross-validation", c8_samplers),
        ("9 mixed process", c9_mixed),
        ("10 determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (passed, detail) = match check() {
            Ok(x) => x,
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.1}s]",
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
