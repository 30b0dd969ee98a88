use std::sync::Arc;

use crate::energy::{dot, CMElement, GramContext};
use crate::error::{Error, Result};

/// `u = Σ_j a_j d_j` with random coefficients `a_j(path)` and deterministic
/// directions `d_j`.
pub trait VectorField: Sync {
    fn slots(&self) -> usize;

    fn direction(&self, j: usize) -> &CMElement;

    fn coefficient(&self, j: usize, path: &[f64]) -> Result<f64>;

    /// `<D a_j, h> = Σ_i ∂_i a_j(path) (Σ h)_i`, given `sigma_h = Σ h`.
    fn derivative_pairing(&self, j: usize, path: &[f64], sigma_h: &[f64]) -> Result<f64>;

    fn coefficients(&self, path: &[f64]) -> Result<Vec<f64>> {
        (0..self.slots()).map(|j| self.coefficient(j, path)).collect()
    }
}

/// Field with affine coefficients `a_j(x) = p_j + Σ_i q_{ji} x_i`; the slopes
/// are stored sparsely and `D a_j = Σ_i q_{ji} k_i` is deterministic.
#[derive(Debug, Clone)]
pub struct AffineField {
    name: String,
    directions: Vec<CMElement>,
    offsets: Vec<f64>,
    slopes: Vec<Vec<(usize, f64)>>,
}

impl AffineField {
    pub fn new(
        name: impl Into<String>,
        directions: Vec<CMElement>,
        offsets: Vec<f64>,
        slopes: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        let n = directions.len();
        for len in [offsets.len(), slopes.len()] {
            if len != n {
                return Err(Error::Dimension { expected: n, got: len });
            }
        }
        if let Some(d) = directions.first() {
            let dim = d.len();
            if directions.iter().any(|e| e.len() != dim) {
                return Err(Error::Domain("directions of different lengths".into()));
            }
            if slopes.iter().flatten().any(|&(i, _)| i >= dim) {
                return Err(Error::Domain("slope coordinate out of range".into()));
            }
        }
        Ok(AffineField {
            name: name.into(),
            directions,
            offsets,
            slopes,
        })
    }

    pub fn deterministic(name: impl Into<String>, directions: Vec<CMElement>, coeffs: Vec<f64>) -> Result<Self> {
        let n = directions.len();
        Self::new(name, directions, coeffs, vec![Vec::new(); n])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_deterministic(&self) -> bool {
        self.slopes.iter().all(Vec::is_empty)
    }

    /// `D a_j` as an element.
    pub fn slope_element(&self, j: usize) -> CMElement {
        let mut q = CMElement::zeros(self.directions[j].len());
        for &(i, w) in &self.slopes[j] {
            q.coeffs_mut()[i] += w;
        }
        q
    }

    /// `E[δ(u)^2] - E[|u|^2] = Σ_{j,l} <D a_j, d_l> <D a_l, d_j>`.
    pub fn isometry_defect(&self, ctx: &GramContext) -> f64 {
        let n = self.slots();
        let sd: Vec<Vec<f64>> = self.directions.iter().map(|d| ctx.apply_sigma(d)).collect();
        let pair = |j: usize, l: usize| -> f64 { self.slopes[j].iter().map(|&(i, w)| w * sd[l][i]).sum() };
        let m: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|l| pair(j, l)).collect()).collect();
        let mut acc = 0.0;
        for j in 0..n {
            for l in 0..n {
                acc += m[j][l] * m[l][j];
            }
        }
        acc
    }
}

impl VectorField for AffineField {
    fn slots(&self) -> usize {
        self.directions.len()
    }

    fn direction(&self, j: usize) -> &CMElement {
        &self.directions[j]
    }

    fn coefficient(&self, j: usize, path: &[f64]) -> Result<f64> {
        Ok(self.offsets[j] + self.slopes[j].iter().map(|&(i, w)| w * path[i]).sum::<f64>())
    }

    fn derivative_pairing(&self, j: usize, _path: &[f64], sigma_h: &[f64]) -> Result<f64> {
        Ok(self.slopes[j].iter().map(|&(i, w)| w * sigma_h[i]).sum())
    }
}

type CoefFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type CoefGrad = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// One coefficient rule of a [`RuleField`].
#[derive(Clone)]
pub struct CoefficientRule {
    value: CoefFn,
    gradient: Option<CoefGrad>,
    constant: bool,
}

impl CoefficientRule {
    pub fn constant(c: f64) -> Self {
        CoefficientRule {
            value: Arc::new(move |_| c),
            gradient: None,
            constant: true,
        }
    }

    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        CoefficientRule {
            value: Arc::new(value),
            gradient: Some(Arc::new(gradient)),
            constant: false,
        }
    }

    /// A random coefficient without a gradient; its divergence is refused.
    pub fn without_gradient(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        CoefficientRule {
            value: Arc::new(value),
            gradient: None,
            constant: false,
        }
    }
}

/// General field from coefficient closures and their gradients.
#[derive(Clone)]
pub struct RuleField {
    directions: Vec<CMElement>,
    rules: Vec<CoefficientRule>,
}

impl RuleField {
    pub fn new(directions: Vec<CMElement>, rules: Vec<CoefficientRule>) -> Result<Self> {
        if directions.len() != rules.len() {
            return Err(Error::Dimension {
                expected: directions.len(),
                got: rules.len(),
            });
        }
        Ok(RuleField { directions, rules })
    }
}

impl VectorField for RuleField {
    fn slots(&self) -> usize {
        self.directions.len()
    }

    fn direction(&self, j: usize) -> &CMElement {
        &self.directions[j]
    }

    fn coefficient(&self, j: usize, path: &[f64]) -> Result<f64> {
        Ok((self.rules[j].value)(path))
    }

    fn derivative_pairing(&self, j: usize, path: &[f64], sigma_h: &[f64]) -> Result<f64> {
        let rule = &self.rules[j];
        if rule.constant {
            return Ok(0.0);
        }
        let grad = rule
            .gradient
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("slot {j} has a random coefficient without gradient")))?;
        let mut g = vec![0.0; path.len()];
        grad(path, &mut g);
        Ok(dot(&g, sigma_h))
    }
}

/// Per-field precomputation: sparse directions, `Σ d_j`, and the Gram matrix
/// of the directions.
#[derive(Debug, Clone)]
pub struct DivergencePlan {
    sparse: Vec<Vec<(usize, f64)>>,
    sigma_d: Vec<Vec<f64>>,
    gram: Vec<f64>,
    slots: usize,
}

impl DivergencePlan {
    pub fn new(ctx: &GramContext, field: &dyn VectorField) -> Result<Self> {
        let n = field.slots();
        let mut sparse = Vec::with_capacity(n);
        let mut sigma_d = Vec::with_capacity(n);
        for j in 0..n {
            let d = field.direction(j);
            if d.len() != ctx.dim() {
                return Err(Error::Dimension {
                    expected: ctx.dim(),
                    got: d.len(),
                });
            }
            sparse.push(
                d.coeffs()
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c != 0.0)
                    .map(|(i, &c)| (i, c))
                    .collect::<Vec<_>>(),
            );
            sigma_d.push(ctx.apply_sigma(d));
        }
        let mut gram = vec![0.0; n * n];
        for j in 0..n {
            for l in 0..n {
                gram[j * n + l] = sparse[j].iter().map(|&(i, c)| c * sigma_d[l][i]).sum();
            }
        }
        Ok(DivergencePlan {
            sparse,
            sigma_d,
            gram,
            slots: n,
        })
    }

    fn sparse_dot(&self, j: usize, v: &[f64]) -> f64 {
        self.sparse[j].iter().map(|&(i, c)| c * v[i]).sum()
    }

    /// `I(d_j)` on a coordinate path.
    pub fn isonormal(&self, j: usize, path: &[f64]) -> f64 {
        self.sparse_dot(j, path)
    }

    /// `δ(u) = Σ_j a_j I(d_j) - Σ_j <D a_j, d_j>`.
    pub fn eval(&self, field: &dyn VectorField, path: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for j in 0..self.slots {
            let a = field.coefficient(j, path)?;
            acc += a * self.sparse_dot(j, path);
            acc -= field.derivative_pairing(j, path, &self.sigma_d[j])?;
        }
        Ok(acc)
    }

    /// `<h, u>` given `sigma_h = Σ h` and the coefficients of `u` on a path.
    pub fn pairing(&self, coeffs: &[f64], sigma_h: &[f64]) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, a)| a * self.sparse_dot(j, sigma_h))
            .sum()
    }

    /// `|u|^2 = Σ_{j,l} a_j a_l <d_j, d_l>`.
    pub fn norm_sq(&self, coeffs: &[f64]) -> f64 {
        let n = self.slots;
        let mut acc = 0.0;
        for j in 0..n {
            let row = &self.gram[j * n..(j + 1) * n];
            acc += coeffs[j] * dot(row, coeffs);
        }
        acc
    }
}

/// `δ(u)` on one coordinate path.
pub fn divergence(ctx: &GramContext, field: &dyn VectorField, path: &[f64]) -> Result<f64> {
    if path.len() != ctx.dim() {
        return Err(Error::Dimension {
            expected: ctx.dim(),
            got: path.len(),
        });
    }
    DivergencePlan::new(ctx, field)?.eval(field, path)
}

/// Increment direction `k_{t_j} - k_{t_{j-1}}` of component `c`, as coordinates.
fn component_increment(ctx: &GramContext, c: usize, j: usize) -> CMElement {
    let mut d = CMElement::zeros(ctx.dim());
    d.coeffs_mut()[ctx.coordinate_index(c, j)] = 1.0;
    if j > 0 {
        d.coeffs_mut()[ctx.coordinate_index(c, j - 1)] = -1.0;
    }
    d
}

/// Slope entries of the observed value `X_{t_i}`.
fn observable_slope(ctx: &GramContext, i: usize) -> Vec<(usize, f64)> {
    ctx.weights()
        .iter()
        .enumerate()
        .map(|(c, &w)| (ctx.coordinate_index(c, i), w))
        .collect()
}

/// `u = X_T k_T`.
pub fn terminal_field(ctx: &GramContext) -> Result<AffineField> {
    let last = ctx.grid().len() - 1;
    AffineField::new(
        "terminal_affine",
        vec![ctx.observable_representer(last)?],
        vec![0.0],
        vec![observable_slope(ctx, last)],
    )
}

/// The three standard test fields, built per component:
///
/// * `deterministic`: `u = k_T`;
/// * `adapted_affine`: increments after `T/2` weighted by the frozen value
///   `X_{T/2}`;
/// * `nonadapted_affine`: increment `j` weighted by `X_{t_{j+1}}` (the last
///   slot reads `X_T`).
pub fn test_fields(ctx: &GramContext) -> Result<Vec<AffineField>> {
    let n = ctx.grid().len();
    let last = n - 1;
    let (mid, _) = ctx.grid().nearest_index(ctx.grid().horizon() / 2.0);
    let det = AffineField::deterministic("deterministic", vec![ctx.observable_representer(last)?], vec![1.0])?;

    let (mut dirs, mut offs, mut slopes) = (Vec::new(), Vec::new(), Vec::new());
    for j in mid + 1..n {
        for c in 0..ctx.n_components() {
            dirs.push(component_increment(ctx, c, j));
            offs.push(0.0);
            slopes.push(observable_slope(ctx, mid));
        }
    }
    let adapted = AffineField::new("adapted_affine", dirs, offs, slopes)?;

    let (mut dirs, mut offs, mut slopes) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..n {
        for c in 0..ctx.n_components() {
            dirs.push(component_increment(ctx, c, j));
            offs.push(0.0);
            slopes.push(observable_slope(ctx, (j + 1).min(last)));
        }
    }
    let nonadapted = AffineField::new("nonadapted_affine", dirs, offs, slopes)?;
    Ok(vec![det, adapted, nonadapted])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CovarianceModel, TimeGrid};
    use approx::assert_abs_diff_eq;

    fn fbm(h: f64, n: usize) -> GramContext {
        GramContext::new(CovarianceModel::fbm(h).unwrap(), TimeGrid::uniform(n, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn deterministic_divergence_is_isonormal() {
        let c = fbm(0.25, 5);
        let path = [0.2, -0.1, 0.4, 0.9, -0.3];
        let u = AffineField::deterministic("k", vec![c.representer(3).unwrap()], vec![1.0]).unwrap();
        assert_eq!(divergence(&c, &u, &path).unwrap(), 0.9);
    }

    #[test]
    fn quadratic_divergence_identity() {
        let c = fbm(0.25, 4);
        let u = terminal_field(&c).unwrap();
        for x in [-1.3, 0.0, 0.7, 2.5] {
            let path = [0.1, 0.2, 0.3, x];
            assert_abs_diff_eq!(divergence(&c, &u, &path).unwrap(), x * x - 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(u.isometry_defect(&c), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn missing_gradient_is_a_contract_error() {
        let c = fbm(0.25, 3);
        let u = RuleField::new(
            vec![c.representer(2).unwrap()],
            vec![CoefficientRule::without_gradient(|x| x[0])],
        )
        .unwrap();
        assert!(matches!(divergence(&c, &u, &[1.0, 2.0, 3.0]), Err(Error::Contract(_))));
        let ok = RuleField::new(
            vec![c.representer(2).unwrap()],
            vec![CoefficientRule::new(|x| x[0] * x[0], |x, g| g[0] = 2.0 * x[0])],
        )
        .unwrap();
        let want = 1.0 * 3.0 - 2.0 * c.sigma()[(0, 2)];
        assert_abs_diff_eq!(divergence(&c, &ok, &[1.0, 2.0, 3.0]).unwrap(), want, epsilon = 1e-14);
    }

    #[test]
    fn rule_and_affine_fields_agree() {
        let c = fbm(0.35, 6);
        let fields = test_fields(&c).unwrap();
        let nonadapted = &fields[2];
        let rules: Vec<CoefficientRule> = (0..nonadapted.slots())
            .map(|j| {
                let q = nonadapted.slope_element(j).into_coeffs();
                let q2 = q.clone();
                CoefficientRule::new(move |x| dot(&q, x), move |_, g| g.copy_from_slice(&q2))
            })
            .collect();
        let dirs = (0..nonadapted.slots()).map(|j| nonadapted.direction(j).clone()).collect();
        let rf = RuleField::new(dirs, rules).unwrap();
        let path = [0.3, -0.2, 0.5, 1.0, 0.1, -0.8];
        assert_abs_diff_eq!(
            divergence(&c, &rf, &path).unwrap(),
            divergence(&c, nonadapted, &path).unwrap(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn brownian_adapted_field_has_no_defect() {
        let c = GramContext::new(CovarianceModel::Bm, TimeGrid::uniform(8, 1.0).unwrap()).unwrap();
        let fields = test_fields(&c).unwrap();
        assert_eq!(fields[0].isometry_defect(&c), 0.0);
        assert_abs_diff_eq!(fields[1].isometry_defect(&c), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rough_defects_have_the_expected_signs() {
        let c = fbm(0.25, 32);
        let fields = test_fields(&c).unwrap();
        let adapted = fields[1].isometry_defect(&c);
        assert!(adapted > 0.03 && adapted < 0.06, "{adapted}");
    }
}
