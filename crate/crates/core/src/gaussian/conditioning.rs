use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::quadrature::{gauss_hermite, GaussHermite, DEFAULT_NODES};
use super::rng::RngStream;
use crate::energy::{dot, AdaptedIndex, CMElement, GramContext};
use crate::error::{Error, Result};

/// Largest whitened dimension the tensor quadrature accepts.
pub const MAX_QUADRATURE_DIM: usize = 4;

/// Law of the unobserved coordinates given the first `observed` ones.
#[derive(Debug, Clone)]
pub struct ConditionalLaw {
    observed: usize,
    mean_map: DMatrix<f64>,
    covariance: DMatrix<f64>,
}

impl ConditionalLaw {
    pub fn observed(&self) -> usize {
        self.observed
    }

    /// `Σ_fp Σ_pp^{-1}`, one row per unobserved coordinate.
    pub fn mean_map(&self) -> &DMatrix<f64> {
        &self.mean_map
    }

    /// Schur complement `Σ_ff - Σ_fp Σ_pp^{-1} Σ_pf`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Conditional means of the unobserved coordinates for a path whose first
    /// `observed` entries are the observation.
    pub fn mean(&self, path: &[f64]) -> Vec<f64> {
        let p = self.observed;
        (0..self.mean_map.nrows())
            .map(|r| {
                let row = self.mean_map.row(r);
                row.iter().zip(&path[..p]).map(|(a, x)| a * x).sum()
            })
            .collect()
    }
}

/// Gaussian regression of the coordinates `j..N` on `0..j`, solved by LU on
/// the raw leading block (independent of the cached Cholesky factor).
pub fn conditional_law(ctx: &GramContext, j: AdaptedIndex) -> Result<ConditionalLaw> {
    let n = ctx.dim();
    let p = j.get();
    if p >= n {
        return Err(Error::Index { index: p, len: n });
    }
    let s = ctx.sigma();
    let f = n - p;
    let s_ff = s.view((p, p), (f, f)).clone_owned();
    if p == 0 {
        return Ok(ConditionalLaw {
            observed: 0,
            mean_map: DMatrix::zeros(f, 0),
            covariance: s_ff,
        });
    }
    let s_pp = s.view((0, 0), (p, p)).clone_owned();
    let s_pf = s.view((0, p), (p, f)).clone_owned();
    let x = s_pp.lu().solve(&s_pf).ok_or_else(|| Error::IllConditioned {
        model: ctx.model().to_string(),
        grid: ctx.grid().to_string(),
        jitter: 0.0,
    })?;
    let mean_map = x.transpose();
    let mut covariance = s_ff - &mean_map * &s_pf;
    covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(ConditionalLaw {
        observed: p,
        mean_map,
        covariance,
    })
}

/// A Monte Carlo or quadrature estimate. `se` is zero for quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone)]
pub enum Method {
    Quadrature(GaussHermite),
    MonteCarlo { samples: usize, rng: RngStream },
}

impl Method {
    pub fn quadrature(nodes: usize) -> Self {
        Method::Quadrature(gauss_hermite(nodes.max(1)))
    }

    pub fn monte_carlo(samples: usize, rng: RngStream) -> Self {
        Method::MonteCarlo {
            samples: samples.max(2),
            rng,
        }
    }

    /// Same method, with the Monte Carlo stream replaced by its child `k`.
    pub fn keyed(&self, k: u64) -> Method {
        match self {
            Method::Quadrature(q) => Method::Quadrature(q.clone()),
            Method::MonteCarlo { samples, rng } => Method::MonteCarlo {
                samples: *samples,
                rng: rng.child(k),
            },
        }
    }
}

impl Default for Method {
    fn default() -> Self {
        Method::quadrature(DEFAULT_NODES)
    }
}

/// Conditional law of a few linear observables `I(h_1), …, I(h_n)` given the
/// first `p` coordinates, prepared once and reused for every path.
///
/// Conditional means are `I(P_p h_k)`; the conditional covariance is
/// `<(Id - P_p) h_k, (Id - P_p) h_l>`, whitened with a pivoted Cholesky
/// factorization that drops directions the prefix already determines.
#[derive(Debug, Clone)]
pub struct ObservablePlan {
    observed: usize,
    mean: Vec<Vec<f64>>,
    factor: Vec<Vec<f64>>,
    covariance: DMatrix<f64>,
}

impl ObservablePlan {
    pub fn new(ctx: &GramContext, observables: &[CMElement], p: AdaptedIndex) -> Result<Self> {
        let p = p.get();
        let n = observables.len();
        let mut mean = Vec::with_capacity(n);
        let mut resid = Vec::with_capacity(n);
        let mut scale: f64 = 0.0;
        for h in observables {
            let proj = ctx.project_adapted(h, AdaptedIndex::new(p, ctx)?)?;
            scale = scale.max(ctx.norm_sq(h)?);
            resid.push(h.sub(&proj));
            mean.push(proj.coeffs()[..p].to_vec());
        }
        let sr: Vec<Vec<f64>> = resid.iter().map(|r| ctx.apply_sigma(r)).collect();
        let covariance = DMatrix::from_fn(n, n, |a, b| dot(resid[a].coeffs(), &sr[b]));
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        let factor = pivoted_cholesky(&covariance, 1e-12 * scale.max(f64::MIN_POSITIVE));
        Ok(ObservablePlan {
            observed: p,
            mean,
            factor,
            covariance,
        })
    }

    /// Number of observed coordinates.
    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Effective dimension of the conditional law.
    pub fn rank(&self) -> usize {
        self.factor.first().map_or(0, Vec::len)
    }

    /// Coefficients of `P_p h_k` on the observed coordinates.
    pub fn mean_coeffs(&self, k: usize) -> &[f64] {
        &self.mean[k]
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Conditional means of the observables for a path (only its first
    /// `observed` entries are read).
    pub fn means(&self, path: &[f64]) -> Vec<f64> {
        let x = &path[..self.observed];
        self.mean.iter().map(|c| dot(c, x)).collect()
    }

    /// `E[g(Y) | prefix]` for a vector-valued `g` writing `out_dim` outputs.
    pub fn expect(
        &self,
        path: &[f64],
        out_dim: usize,
        method: &Method,
        mut g: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Vec<Estimate>> {
        let mu = self.means(path);
        let r = self.rank();
        let mut y = mu.clone();
        let mut out = vec![0.0; out_dim];
        let fill = |z: &[f64], y: &mut [f64]| {
            for (k, yk) in y.iter_mut().enumerate() {
                *yk = mu[k] + dot(&self.factor[k], z);
            }
        };
        if r == 0 {
            g(&mu, &mut out);
            return Ok(out.into_iter().map(|value| Estimate { value, se: 0.0 }).collect());
        }
        match method {
            Method::Quadrature(rule) => {
                if r > MAX_QUADRATURE_DIM {
                    return Err(Error::Unsupported(format!(
                        "quadrature over {r} conditional dimensions (max {MAX_QUADRATURE_DIM}); use Monte Carlo"
                    )));
                }
                let mut acc = vec![0.0; out_dim];
                rule.for_each_node(r, |z, w| {
                    fill(z, &mut y);
                    g(&y, &mut out);
                    for (a, o) in acc.iter_mut().zip(&out) {
                        *a += w * o;
                    }
                });
                Ok(acc.into_iter().map(|value| Estimate { value, se: 0.0 }).collect())
            }
            Method::MonteCarlo { samples, rng } => {
                let mut rng = rng.rng();
                let mut z = vec![0.0; r];
                let mut s1 = vec![0.0; out_dim];
                let mut s2 = vec![0.0; out_dim];
                for _ in 0..*samples {
                    for zi in z.iter_mut() {
                        *zi = StandardNormal.sample(&mut rng);
                    }
                    fill(&z, &mut y);
                    g(&y, &mut out);
                    for k in 0..out_dim {
                        s1[k] += out[k];
                        s2[k] += out[k] * out[k];
                    }
                }
                let m = *samples as f64;
                Ok((0..out_dim)
                    .map(|k| {
                        let mean = s1[k] / m;
                        let var = ((s2[k] - m * mean * mean) / (m - 1.0)).max(0.0);
                        Estimate {
                            value: mean,
                            se: (var / m).sqrt(),
                        }
                    })
                    .collect())
            }
        }
    }
}

/// `A` with `A Aᵀ ≈ c`, columns added greedily by largest remaining pivot
/// until the remaining diagonal is below `tol`. Rows of the result are
/// indexed like `c`.
fn pivoted_cholesky(c: &DMatrix<f64>, tol: f64) -> Vec<Vec<f64>> {
    let n = c.nrows();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut diag: Vec<f64> = (0..n).map(|i| c[(i, i)]).collect();
    while cols.len() < n {
        let (piv, &d) = diag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        if d <= tol {
            break;
        }
        let root = d.sqrt();
        let col: Vec<f64> = (0..n)
            .map(|i| {
                let prev: f64 = cols.iter().map(|l| l[i] * l[piv]).sum();
                (c[(i, piv)] - prev) / root
            })
            .collect();
        for (di, li) in diag.iter_mut().zip(&col) {
            *di -= li * li;
        }
        diag[piv] = 0.0;
        cols.push(col);
    }
    (0..n).map(|i| cols.iter().map(|l| l[i]).collect()).collect()
}

/// `E[g(X_{t_i}, i in times) | first j coordinates]` for one path.
pub fn conditional_expectation(
    ctx: &GramContext,
    times: &[usize],
    g: impl Fn(&[f64]) -> f64,
    j: AdaptedIndex,
    path: &[f64],
    method: &Method,
) -> Result<Estimate> {
    let obs = times
        .iter()
        .map(|&i| ctx.observable_representer(i))
        .collect::<Result<Vec<_>>>()?;
    let plan = ObservablePlan::new(ctx, &obs, j)?;
    let est = plan.expect(path, 1, method, |y, out| out[0] = g(y))?;
    Ok(est[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CovarianceModel, TimeGrid};
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;

    fn ctx(model: CovarianceModel, n: usize) -> GramContext {
        GramContext::new(model, TimeGrid::uniform(n, 1.0).unwrap()).unwrap()
    }

    fn fbm(h: f64, n: usize) -> GramContext {
        ctx(CovarianceModel::fbm(h).unwrap(), n)
    }

    fn path(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i as f64) * 0.7).sin()).collect()
    }

    #[test]
    fn trivial_law_is_unconditional() {
        let c = fbm(0.3, 6);
        let law = conditional_law(&c, AdaptedIndex::TRIVIAL).unwrap();
        assert_eq!(law.mean_map().ncols(), 0);
        assert_eq!(law.covariance(), c.sigma());
    }

    #[test]
    fn brownian_regression_is_last_value() {
        let c = ctx(CovarianceModel::Bm, 8);
        for j in 1..8 {
            let law = conditional_law(&c, AdaptedIndex::new(j, &c).unwrap()).unwrap();
            for r in 0..law.mean_map().nrows() {
                for k in 0..j {
                    let expect = if k == j - 1 { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(law.mean_map()[(r, k)], expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn conditioning_reduces_variance_and_stays_psd() {
        let c = fbm(0.1, 24);
        for j in 0..24 {
            let law = conditional_law(&c, AdaptedIndex::new(j, &c).unwrap()).unwrap();
            let cov = law.covariance();
            for r in 0..cov.nrows() {
                assert!(cov[(r, r)] <= c.sigma()[(j + r, j + r)] + 1e-10);
            }
            let eig = SymmetricEigen::new(cov.clone()).eigenvalues;
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10 * cov.trace(), "j={j}: {min}");
        }
    }

    #[test]
    fn plan_matches_law() {
        let c = fbm(0.25, 10);
        let x = path(10);
        let j = 4;
        let law = conditional_law(&c, AdaptedIndex::new(j, &c).unwrap()).unwrap();
        let obs = vec![c.representer(6).unwrap(), c.representer(9).unwrap()];
        let plan = ObservablePlan::new(&c, &obs, AdaptedIndex::new(j, &c).unwrap()).unwrap();
        let lm = law.mean(&x);
        let pm = plan.means(&x);
        assert_abs_diff_eq!(pm[0], lm[6 - j], epsilon = 1e-10);
        assert_abs_diff_eq!(pm[1], lm[9 - j], epsilon = 1e-10);
        assert_abs_diff_eq!(plan.covariance()[(0, 1)], law.covariance()[(6 - j, 9 - j)], epsilon = 1e-10);
        assert_eq!(plan.rank(), 2);
    }

    #[test]
    fn linear_and_square_are_exact() {
        let c = fbm(0.25, 8);
        let x = path(8);
        let j = AdaptedIndex::new(3, &c).unwrap();
        let law = conditional_law(&c, j).unwrap();
        let (mu, var) = (law.mean(&x)[7 - 3], law.covariance()[(7 - 3, 7 - 3)]);
        let q = Method::default();
        let lin = conditional_expectation(&c, &[7], |y| 2.0 * y[0] - 1.0, j, &x, &q).unwrap();
        assert_abs_diff_eq!(lin.value, 2.0 * mu - 1.0, epsilon = 1e-10);
        let sq = conditional_expectation(&c, &[7], |y| y[0] * y[0], j, &x, &q).unwrap();
        assert_abs_diff_eq!(sq.value, mu * mu + var, epsilon = 1e-10);
        assert_eq!(sq.se, 0.0);
    }

    #[test]
    fn measurable_case_is_pointwise() {
        let c = fbm(0.25, 8);
        let x = path(8);
        let j = AdaptedIndex::new(6, &c).unwrap();
        let g = |y: &[f64]| y[0].sin() + y[1].cos();
        let e = conditional_expectation(&c, &[2, 5], g, j, &x, &Method::default()).unwrap();
        assert_abs_diff_eq!(e.value, g(&[x[2], x[5]]), epsilon = 1e-12);
    }

    #[test]
    fn tower_property() {
        let c = fbm(0.25, 6);
        let x = path(6);
        let g = |y: &[f64]| y[0].sin() + y[1].cos() + y[1] * y[1];
        let q = Method::default();
        let (j, jj) = (2, 4);
        let times = [3, 5];
        let direct = conditional_expectation(&c, &times, g, AdaptedIndex::new(j, &c).unwrap(), &x, &q).unwrap();
        let mid: Vec<CMElement> = (j..jj).map(|k| c.representer(k).unwrap()).collect();
        let outer = ObservablePlan::new(&c, &mid, AdaptedIndex::new(j, &c).unwrap()).unwrap();
        let mut work = x.clone();
        let nested = outer
            .expect(&x, 1, &q, |y, out| {
                work[j..jj].copy_from_slice(y);
                out[0] = conditional_expectation(&c, &times, g, AdaptedIndex::new(jj, &c).unwrap(), &work, &q)
                    .unwrap()
                    .value;
            })
            .unwrap();
        assert_abs_diff_eq!(nested[0].value, direct.value, epsilon = 1e-8);
    }

    #[test]
    fn high_dimension_needs_monte_carlo() {
        let c = fbm(0.4, 8);
        let x = path(8);
        let times = [3, 4, 5, 6, 7];
        let g = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>();
        let j = AdaptedIndex::new(2, &c).unwrap();
        let err = conditional_expectation(&c, &times, g, j, &x, &Method::default()).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        let law = conditional_law(&c, j).unwrap();
        let mu = law.mean(&x);
        let exact: f64 = times.iter().map(|&t| mu[t - 2].powi(2) + law.covariance()[(t - 2, t - 2)]).sum();
        let mc = conditional_expectation(&c, &times, g, j, &x, &Method::monte_carlo(20_000, RngStream::new(1, 0))).unwrap();
        assert!((mc.value - exact).abs() <= 4.0 * mc.se, "{} vs {exact} ± {}", mc.value, mc.se);
    }
}
