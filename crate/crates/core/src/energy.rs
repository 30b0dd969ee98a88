//! The discrete Cameron–Martin space of a grid.
//!
//! An element `h = Σ_k c_k k_{x_k}` is stored by its coefficient vector `c`
//! over the coordinates of a [`GramContext`]; every inner product goes
//! through the Gram matrix, `<a, b> = aᵀ Σ b`.
//!
//! For pure models the coordinates are the grid times. For a mixed model
//! `alpha·B + beta·B^H` built with [`GramContext::components`] the coordinates
//! are the component values `(B_{t_i}, B^H_{t_i})`, interleaved by time so
//! that a prefix of coordinates is always the information up to some grid
//! time; the Gram matrix is block diagonal and the energy space is the direct
//! sum of the component spaces.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{build_gram, CovarianceModel, GramMatrix, TimeGrid};

/// Coefficients of `Σ_k c_k k_{x_k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CMElement {
    coeffs: Vec<f64>,
}

impl CMElement {
    pub fn new(coeffs: Vec<f64>) -> Self {
        CMElement { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        CMElement {
            coeffs: vec![0.0; n],
        }
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = Self::zeros(n);
        e.coeffs[i] = 1.0;
        e
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `self += a·other`
    pub fn axpy(&mut self, a: f64, other: &CMElement) {
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn scaled(&self, a: f64) -> CMElement {
        CMElement::new(self.coeffs.iter().map(|x| a * x).collect())
    }

    pub fn sub(&self, other: &CMElement) -> CMElement {
        CMElement::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x - y)
                .collect(),
        )
    }

    /// Largest index with a nonzero coefficient, if any.
    pub fn support_end(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .map_or(0, |i| i + 1)
    }
}

/// Information up to a number of observed coordinates; `0` is the trivial
/// sigma-algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct AdaptedIndex(usize);

impl AdaptedIndex {
    pub const TRIVIAL: AdaptedIndex = AdaptedIndex(0);

    pub fn new(j: usize, ctx: &GramContext) -> Result<Self> {
        if j > ctx.dim() {
            return Err(Error::Index {
                index: j,
                len: ctx.dim(),
            });
        }
        Ok(AdaptedIndex(j))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Position of a coordinate: which independent component and which grid time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coordinate {
    pub component: usize,
    pub time_index: usize,
}

/// Grid, model and factored Gram matrix; the discrete energy space.
#[derive(Debug, Clone)]
pub struct GramContext {
    model: CovarianceModel,
    grid: TimeGrid,
    weights: Vec<f64>,
    gram: GramMatrix,
}

impl GramContext {
    /// Energy space of the observed process itself: one coordinate per grid
    /// time, `Σ_ij = R_X(t_i, t_j)`.
    pub fn new(model: CovarianceModel, grid: TimeGrid) -> Result<Self> {
        let gram = build_gram(&model, &grid)?;
        Ok(GramContext {
            model,
            grid,
            weights: vec![1.0],
            gram,
        })
    }

    /// Direct-sum energy space over the independent components of `model`.
    /// Identical to [`GramContext::new`] for pure models.
    pub fn components(model: CovarianceModel, grid: TimeGrid) -> Result<Self> {
        let comps = model.components();
        if comps.len() == 1 {
            let gram = build_gram(&comps[0].model, &grid)?;
            return Ok(GramContext {
                model,
                grid,
                weights: vec![comps[0].weight],
                gram,
            });
        }
        let nc = comps.len();
        let t = grid.times();
        let n = t.len() * nc;
        let sigma = DMatrix::from_fn(n, n, |a, b| {
            let (ca, ia) = (a % nc, a / nc);
            let (cb, ib) = (b % nc, b / nc);
            if ca == cb {
                comps[ca].model.covariance_unchecked(t[ia], t[ib])
            } else {
                0.0
            }
        });
        let gram = GramMatrix::factor(sigma, || {
            (format!("{model} (components)"), grid.to_string())
        })?;
        Ok(GramContext {
            model,
            grid,
            weights: comps.iter().map(|c| c.weight).collect(),
            gram,
        })
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        self.gram.sigma()
    }

    pub fn jitter_applied(&self) -> f64 {
        self.gram.jitter_applied()
    }

    /// Number of coordinates (grid size times number of components).
    pub fn dim(&self) -> usize {
        self.gram.dim()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coordinate(&self, k: usize) -> Coordinate {
        let nc = self.n_components();
        Coordinate {
            component: k % nc,
            time_index: k / nc,
        }
    }

    /// Coordinate index of component `c` at grid time `i`.
    pub fn coordinate_index(&self, component: usize, time_index: usize) -> usize {
        time_index * self.n_components() + component
    }

    /// Information carried by the first `times_observed` grid times.
    pub fn time_prefix(&self, times_observed: usize) -> AdaptedIndex {
        AdaptedIndex((times_observed * self.n_components()).min(self.dim()))
    }

    fn check_len(&self, h: &CMElement) -> Result<()> {
        if h.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: h.len(),
            });
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dim() {
            return Err(Error::Index {
                index: i,
                len: self.dim(),
            });
        }
        Ok(())
    }

    /// `Σ c`, i.e. the values `h(x_k)` of the element at every coordinate.
    pub fn apply_sigma(&self, h: &CMElement) -> Vec<f64> {
        let s = self.sigma();
        let n = self.dim();
        let c = h.coeffs();
        let end = h.support_end();
        let mut out = vec![0.0; n];
        for (j, &cj) in c.iter().enumerate().take(end) {
            if cj == 0.0 {
                continue;
            }
            let col = s.column(j);
            for (o, &sij) in out.iter_mut().zip(col.iter()) {
                *o += sij * cj;
            }
        }
        out
    }

    /// `<a, b> = aᵀ Σ b`
    pub fn inner_product(&self, a: &CMElement, b: &CMElement) -> Result<f64> {
        self.check_len(a)?;
        self.check_len(b)?;
        let sb = self.apply_sigma(b);
        Ok(a.coeffs().iter().zip(&sb).map(|(x, y)| x * y).sum())
    }

    pub fn norm_sq(&self, h: &CMElement) -> Result<f64> {
        self.inner_product(h, h)
    }

    /// Evaluation representer `k_{x_i}` (unit coordinate vector).
    pub fn representer(&self, i: usize) -> Result<CMElement> {
        self.check_index(i)?;
        Ok(CMElement::unit(self.dim(), i))
    }

    /// Representer of the observed value `X_{t_i} = Σ_c w_c x_{(c,i)}`.
    pub fn observable_representer(&self, time_index: usize) -> Result<CMElement> {
        if time_index >= self.grid.len() {
            return Err(Error::Index {
                index: time_index,
                len: self.grid.len(),
            });
        }
        let mut h = CMElement::zeros(self.dim());
        for (c, &w) in self.weights.iter().enumerate() {
            h.coeffs_mut()[self.coordinate_index(c, time_index)] = w;
        }
        Ok(h)
    }

    /// `k_{t_j} - k_{t_i}` of the observed process, `i = None` meaning time 0.
    pub fn observable_increment(&self, from: Option<usize>, to: usize) -> Result<CMElement> {
        let mut h = self.observable_representer(to)?;
        if let Some(i) = from {
            if i >= to {
                return Err(Error::Domain(format!(
                    "increment needs from < to, got {i} >= {to}"
                )));
            }
            h.axpy(-1.0, &self.observable_representer(i)?);
        }
        Ok(h)
    }

    /// Reproducing property: `h(x_i) = <h, k_{x_i}> = (Σ c)_i`.
    pub fn evaluate(&self, h: &CMElement, i: usize) -> Result<f64> {
        self.check_len(h)?;
        self.check_index(i)?;
        let row = self.sigma().row(i);
        Ok(row.iter().zip(h.coeffs()).map(|(s, c)| s * c).sum())
    }

    /// Coordinate increment `k_j - k_i`; `i = None` stands for `k_0 = 0`.
    pub fn increment_element(&self, from: Option<usize>, to: usize) -> Result<CMElement> {
        self.check_index(to)?;
        let mut h = CMElement::unit(self.dim(), to);
        if let Some(i) = from {
            if i >= to {
                return Err(Error::Domain(format!(
                    "increment needs from < to, got {i} >= {to}"
                )));
            }
            h.coeffs_mut()[i] = -1.0;
        }
        Ok(h)
    }

    /// Solve `Σ_{<p,<p} y = rhs` with the leading block of the cached factor.
    pub fn solve_leading(&self, p: usize, rhs: &mut [f64]) {
        debug_assert_eq!(rhs.len(), p);
        let l = self.gram.chol();
        // forward: L y = b
        for i in 0..p {
            let mut acc = rhs[i];
            for k in 0..i {
                acc -= l[(i, k)] * rhs[k];
            }
            rhs[i] = acc / l[(i, i)];
        }
        // backward: Lᵀ x = y
        for i in (0..p).rev() {
            let mut acc = rhs[i];
            for k in i + 1..p {
                acc -= l[(k, i)] * rhs[k];
            }
            rhs[i] = acc / l[(i, i)];
        }
    }

    /// Orthogonal projection onto `span{k_x : x among the first p coordinates}`.
    ///
    /// The projection `P_p h` has coefficients `Σ_{<p,<p}^{-1} (Σ c)_{<p}` on the
    /// first `p` coordinates and zero elsewhere.
    pub fn project_adapted(&self, h: &CMElement, p: AdaptedIndex) -> Result<CMElement> {
        self.check_len(h)?;
        let p = p.get();
        if p > self.dim() {
            return Err(Error::Index {
                index: p,
                len: self.dim(),
            });
        }
        let mut out = CMElement::zeros(self.dim());
        if p == 0 {
            return Ok(out);
        }
        let sc = self.apply_sigma(h);
        let y = &mut out.coeffs_mut()[..p];
        y.copy_from_slice(&sc[..p]);
        self.solve_leading(p, y);
        Ok(out)
    }

    /// Values of the observed process at every grid time, from a coordinate path.
    pub fn observe(&self, path: &[f64]) -> Vec<f64> {
        let nc = self.n_components();
        if nc == 1 && self.weights[0] == 1.0 {
            return path.to_vec();
        }
        path.chunks(nc)
            .map(|xs| xs.iter().zip(&self.weights).map(|(x, w)| x * w).sum())
            .collect()
    }

    /// `I(h) = Σ_k c_k x_k` for a coordinate path.
    pub fn isonormal(&self, h: &CMElement, path: &[f64]) -> Result<f64> {
        self.check_len(h)?;
        if path.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: path.len(),
            });
        }
        Ok(dot(h.coeffs(), path))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
