use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::RngStream;
use crate::model::TimeGrid;

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Step of the central finite differences used when no gradient is given.
pub const FD_STEP: f64 = 1e-5;

/// `F = f(X_{t_{i_1}}, …, X_{t_{i_n}})` over grid indices `i_1 < … < i_n`.
#[derive(Clone)]
pub struct CylindricalFunctional {
    name: String,
    indices: Vec<usize>,
    f: ValueFn,
    grad: Option<GradFn>,
    affine: bool,
}

impl fmt::Debug for CylindricalFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylindricalFunctional")
            .field("name", &self.name)
            .field("indices", &self.indices)
            .field("analytic_gradient", &self.grad.is_some())
            .finish()
    }
}

fn check_indices(indices: &[usize]) -> Result<()> {
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(format!(
            "functional indices must be strictly increasing, got {indices:?}"
        )));
    }
    Ok(())
}

impl CylindricalFunctional {
    pub fn new(
        name: impl Into<String>,
        indices: Vec<usize>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        check_indices(&indices)?;
        Ok(CylindricalFunctional {
            name: name.into(),
            indices,
            f: Arc::new(f),
            grad: Some(Arc::new(grad)),
            affine: false,
        })
    }

    /// A functional without an analytic gradient; derivatives use central
    /// differences with step [`FD_STEP`].
    pub fn finite_difference(
        name: impl Into<String>,
        indices: Vec<usize>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_indices(&indices)?;
        Ok(CylindricalFunctional {
            name: name.into(),
            indices,
            f: Arc::new(f),
            grad: None,
            affine: false,
        })
    }

    pub fn constant(c: f64) -> Self {
        CylindricalFunctional {
            name: "constant".into(),
            indices: Vec::new(),
            f: Arc::new(move |_| c),
            grad: Some(Arc::new(|_, _| {})),
            affine: true,
        }
    }

    /// `Σ_k c_k X_{t_{i_k}}`
    pub fn linear(indices: Vec<usize>, coeffs: Vec<f64>) -> Result<Self> {
        if indices.len() != coeffs.len() {
            return Err(Error::Dimension {
                expected: indices.len(),
                got: coeffs.len(),
            });
        }
        let c2 = coeffs.clone();
        Self::new(
            "linear",
            indices,
            move |x| x.iter().zip(&coeffs).map(|(a, b)| a * b).sum(),
            move |_, g| g.copy_from_slice(&c2),
        )
        .map(|mut f| {
            f.affine = true;
            f
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn arity(&self) -> usize {
        self.indices.len()
    }

    /// True for constants, linear functionals and their combinations; their
    /// gradient does not depend on the path.
    pub fn is_affine(&self) -> bool {
        self.affine
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    /// `f(x)` for the values `x` at the functional's indices.
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// `∇f(x)`, analytic when available.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match &self.grad {
            Some(g) => g(x, out),
            None => self.fd_gradient(x, out),
        }
    }

    fn fd_gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut y = x.to_vec();
        for k in 0..x.len() {
            y[k] = x[k] + FD_STEP;
            let up = (self.f)(&y);
            y[k] = x[k] - FD_STEP;
            let down = (self.f)(&y);
            y[k] = x[k];
            out[k] = (up - down) / (2.0 * FD_STEP);
        }
    }

    /// Values at the functional's indices, gathered from observed grid values.
    pub fn gather(&self, observed: &[f64], out: &mut [f64]) {
        for (o, &i) in out.iter_mut().zip(&self.indices) {
            *o = observed[i];
        }
    }

    /// `F` evaluated on a full vector of observed grid values.
    pub fn on_path(&self, observed: &[f64]) -> f64 {
        let mut x = vec![0.0; self.arity()];
        self.gather(observed, &mut x);
        self.value(&x)
    }

    /// `a·F + b·G`, over the union of the index sets.
    pub fn combine(a: f64, f: &Self, b: f64, g: &Self) -> Self {
        let mut indices: Vec<usize> = f.indices.iter().chain(&g.indices).copied().collect();
        indices.sort_unstable();
        indices.dedup();
        let pos = |sub: &[usize]| -> Vec<usize> {
            sub.iter()
                .map(|i| indices.binary_search(i).expect("index in union"))
                .collect()
        };
        let (pf, pg) = (pos(&f.indices), pos(&g.indices));
        let (f1, g1) = (f.clone(), g.clone());
        let (pf1, pg1) = (pf.clone(), pg.clone());
        let pick = |x: &[f64], p: &[usize]| -> Vec<f64> { p.iter().map(|&k| x[k]).collect() };
        let value = move |x: &[f64]| a * f1.value(&pick(x, &pf1)) + b * g1.value(&pick(x, &pg1));
        let (f2, g2) = (f.clone(), g.clone());
        let grad = move |x: &[f64], out: &mut [f64]| {
            out.iter_mut().for_each(|o| *o = 0.0);
            for (func, p, w) in [(&f2, &pf, a), (&g2, &pg, b)] {
                let xs = pick(x, p);
                let mut gs = vec![0.0; p.len()];
                func.gradient(&xs, &mut gs);
                for (&k, gk) in p.iter().zip(gs) {
                    out[k] += w * gk;
                }
            }
        };
        CylindricalFunctional {
            name: format!("{a}*{}+{b}*{}", f.name, g.name),
            indices,
            f: Arc::new(value),
            grad: Some(Arc::new(grad)),
            affine: f.affine && g.affine,
        }
    }
}

/// `F = ∫_0^T g(s, X_s) ds` with its x-derivative `∂_x g`.
#[derive(Clone)]
pub struct IntegralFunctional {
    name: String,
    g: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    dg: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for IntegralFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntegralFunctional")
            .field("name", &self.name)
            .finish()
    }
}

impl IntegralFunctional {
    pub fn new(
        name: impl Into<String>,
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dg: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        IntegralFunctional {
            name: name.into(),
            g: Arc::new(g),
            dg: Arc::new(dg),
        }
    }

    /// Trapezoid rule on `0 = t_0 < t_1 < … < t_N`, with `X_0 = 0`:
    /// `f(x) = w_0 g(0, 0) + Σ_k w_k g(t_k, x_k)` and `∂_k f = w_k ∂_x g(t_k, x_k)`.
    pub fn discretize(&self, grid: &TimeGrid) -> CylindricalFunctional {
        let t = grid.times().to_vec();
        let n = t.len();
        let mut w = vec![0.0; n];
        let w0 = 0.5 * t[0];
        for k in 0..n {
            let left = if k == 0 { 0.0 } else { t[k - 1] };
            let right = if k + 1 < n { t[k + 1] } else { t[k] };
            w[k] = 0.5 * (right - left);
        }
        let base = w0 * (self.g)(0.0, 0.0);
        let (g, dg) = (self.g.clone(), self.dg.clone());
        let (t1, w1) = (t.clone(), w.clone());
        CylindricalFunctional {
            name: self.name.clone(),
            indices: (0..n).collect(),
            f: Arc::new(move |x| {
                let mut acc = base;
                for k in 0..x.len() {
                    acc += w1[k] * g(t1[k], x[k]);
                }
                acc
            }),
            grad: Some(Arc::new(move |x, out| {
                for k in 0..x.len() {
                    out[k] = w[k] * dg(t[k], x[k]);
                }
            })),
            affine: false,
        }
    }
}

/// Outcome of comparing a gradient against central finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientCheck {
    pub max_deviation: f64,
    pub passed: bool,
}

pub const GRADIENT_TOLERANCE: f64 = 1e-4;

/// Compare `∇f` with central differences (step [`FD_STEP`]) at 100 points
/// drawn uniformly from `[-3, 3]^n`. The deviation is
/// `|g - fd| / max(|fd|, 1)`, maximised over points and coordinates.
pub fn gradient_check(f: &CylindricalFunctional) -> GradientCheck {
    let n = f.arity();
    let mut rng = RngStream::new(0x6772_6164, 0).rng();
    let mut x = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut fd = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        for xi in x.iter_mut() {
            *xi = rng.random_range(-3.0..=3.0);
        }
        f.gradient(&x, &mut g);
        f.fd_gradient(&x, &mut fd);
        for k in 0..n {
            worst = worst.max((g[k] - fd[k]).abs() / fd[k].abs().max(1.0));
        }
    }
    GradientCheck {
        max_deviation: worst,
        passed: worst <= GRADIENT_TOLERANCE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square() -> CylindricalFunctional {
        CylindricalFunctional::new("sq", vec![0], |x| x[0] * x[0], |x, g| g[0] = 2.0 * x[0]).unwrap()
    }

    #[test]
    fn gradient_checks() {
        let sq = gradient_check(&square());
        assert!(sq.passed && sq.max_deviation < 1e-8, "{sq:?}");
        let s = CylindricalFunctional::new("sin", vec![0], |x| x[0].sin(), |x, g| g[0] = x[0].cos()).unwrap();
        assert!(gradient_check(&s).max_deviation <= 1e-4);
        let bad = CylindricalFunctional::new("bad", vec![0], |x| x[0] * x[0], |x, g| g[0] = 2.2 * x[0]).unwrap();
        let r = gradient_check(&bad);
        assert!(!r.passed);
        assert!((r.max_deviation - 0.1).abs() < 0.01, "{r:?}");
    }

    #[test]
    fn finite_difference_fallback() {
        let f = CylindricalFunctional::finite_difference("cube", vec![1, 4], |x| x[0].powi(3) + x[1]).unwrap();
        assert!(!f.has_analytic_gradient());
        let mut g = [0.0; 2];
        f.gradient(&[2.0, 5.0], &mut g);
        assert_abs_diff_eq!(g[0], 12.0, epsilon = 1e-6);
        assert_abs_diff_eq!(g[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rejects_unsorted_indices() {
        assert!(CylindricalFunctional::linear(vec![3, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn combination_is_linear() {
        let f = square();
        let g = CylindricalFunctional::linear(vec![0, 2], vec![1.0, -1.0]).unwrap();
        let h = CylindricalFunctional::combine(2.0, &f, -3.0, &g);
        assert_eq!(h.indices(), &[0, 2]);
        let x = [1.5, 0.7];
        assert_abs_diff_eq!(h.value(&x), 2.0 * 2.25 - 3.0 * 0.8, epsilon = 1e-14);
        let mut grad = [0.0; 2];
        h.gradient(&x, &mut grad);
        assert_eq!(grad, [2.0 * 3.0 - 3.0, 3.0]);
        assert!(!h.is_affine() && g.is_affine());
        let two = CylindricalFunctional::combine(1.0, &g, 2.0, &CylindricalFunctional::constant(1.0));
        assert!(two.is_affine());
    }

    #[test]
    fn trapezoid_weights() {
        let grid = TimeGrid::uniform(4, 1.0).unwrap();
        let one = IntegralFunctional::new("one", |_, _| 1.0, |_, _| 0.0).discretize(&grid);
        assert_abs_diff_eq!(one.value(&[9.0; 4]), 1.0, epsilon = 1e-15);
        let mut g = [1.0; 4];
        one.gradient(&[0.3; 4], &mut g);
        assert_eq!(g, [0.0; 4]);
        let s = IntegralFunctional::new("s", |s, _| s, |_, _| 0.0).discretize(&grid);
        assert_abs_diff_eq!(s.value(&[0.0; 4]), 0.5, epsilon = 1e-15);
        let x = IntegralFunctional::new("x", |_, x| x, |_, _| 1.0).discretize(&grid);
        let mut w = [0.0; 4];
        x.gradient(&[0.0; 4], &mut w);
        assert_eq!(w, [0.25, 0.25, 0.25, 0.125]);
    }
}
