use roughcalc_web::{fbm_paths, projection_curves, remainder_report};
use serde_json::Value;

#[test]
fn paths_have_requested_shape_and_are_seeded() {
    let a = fbm_paths(0.3, 50, 4, 9).ok().unwrap();
    assert_eq!(a.len(), 200);
    assert_eq!(a, fbm_paths(0.3, 50, 4, 9).ok().unwrap());
    assert_ne!(a, fbm_paths(0.3, 50, 4, 10).ok().unwrap());
}

#[test]
fn projection_variance_decreases_to_zero() {
    let v: Value = serde_json::from_str(&projection_curves(0.25, 16).ok().unwrap()).unwrap();
    let var: Vec<f64> = v["conditional_variance"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(var.len(), 17);
    assert!((var[0] - 1.0).abs() < 1e-12);
    assert!(var[16].abs() < 1e-12);
    assert!(var.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn remainder_report_is_json() {
    let v: Value = serde_json::from_str(&remainder_report(0.25, "quadratic", 1000, 1).ok().unwrap()).unwrap();
    assert_eq!(v["experiment"], "remainder");
    assert_eq!(v["results"].as_array().unwrap().len(), 5);
    assert!(v["summary"]["slope"].as_f64().unwrap().is_finite());
}
