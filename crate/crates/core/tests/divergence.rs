//! Monte Carlo checks of divergence identities beyond the acceptance suite.

use roughcalc::gaussian::{sample_ensemble, RngStream};
use roughcalc::malliavin::{test_fields, AffineField, DivergencePlan, VectorField};
use roughcalc::stats::Summary;
use roughcalc::{CMElement, CovarianceModel, GramContext, TimeGrid};

const PATHS: usize = 100_000;

fn increment(n: usize, j: usize) -> CMElement {
    let mut d = CMElement::zeros(n);
    d.coeffs_mut()[j] = 1.0;
    if j > 0 {
        d.coeffs_mut()[j - 1] = -1.0;
    }
    d
}

#[test]
fn brownian_isometry_on_predictable_fields() {
    let n = 16;
    let ctx = GramContext::new(CovarianceModel::Bm, TimeGrid::uniform(n, 1.0).unwrap()).unwrap();
    // a_j = X_{t_{j-1}} on increment j
    let dirs: Vec<CMElement> = (1..n).map(|j| increment(n, j)).collect();
    let slopes = (1..n).map(|j| vec![(j - 1, 1.0)]).collect();
    let u = AffineField::new("lagged", dirs, vec![0.0; n - 1], slopes).unwrap();
    let plan = DivergencePlan::new(&ctx, &u).unwrap();
    let ens = sample_ensemble(&ctx, PATHS, RngStream::new(17, 1)).unwrap();
    let diff: Vec<f64> = ens
        .rows()
        .map(|p| {
            let d = plan.eval(&u, p).unwrap();
            d * d - plan.norm_sq(&u.coefficients(p).unwrap())
        })
        .collect();
    let s = Summary::from_slice(&diff);
    assert!(s.mean.abs() <= 3.0 * s.se(), "{} ± {}", s.mean, s.se());
    assert_eq!(u.isometry_defect(&ctx), 0.0);
}

#[test]
fn divergence_is_centered_for_all_test_fields() {
    for h in [0.25, 0.4] {
        let ctx = GramContext::new(CovarianceModel::fbm(h).unwrap(), TimeGrid::uniform(32, 1.0).unwrap()).unwrap();
        let ens = sample_ensemble(&ctx, PATHS, RngStream::new(3, 9)).unwrap();
        for u in test_fields(&ctx).unwrap() {
            let plan = DivergencePlan::new(&ctx, &u).unwrap();
            let d: Vec<f64> = ens.rows().map(|p| plan.eval(&u, p).unwrap()).collect();
            let s = Summary::from_slice(&d);
            assert!(s.mean.abs() <= 3.0 * s.se(), "H={h} {}: {} ± {}", u.name(), s.mean, s.se());
        }
    }
}
