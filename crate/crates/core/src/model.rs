//! Covariance models, time grids and the Gram matrix of a grid.

use std::fmt;

use nalgebra::{Cholesky, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};

/// Hurst parameter, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Hurst(value))
        } else {
            Err(Error::Domain(format!(
                "Hurst parameter must lie in (0, 1), got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Covariance of a centered Gaussian process on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovarianceModel {
    /// Standard Brownian motion, `R(t, s) = min(t, s)`.
    Bm,
    /// Fractional Brownian motion.
    Fbm { hurst: Hurst },
    /// `alpha·B + beta·B^H` with independent components.
    Mixed { alpha: f64, beta: f64, hurst: Hurst },
}

/// One independent Gaussian component of a model with its weight in the
/// observed process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub model: CovarianceModel,
}

fn fbm_cov(h: f64, t: f64, s: f64) -> f64 {
    let two_h = 2.0 * h;
    0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
}

impl CovarianceModel {
    pub fn fbm(hurst: f64) -> Result<Self> {
        Ok(CovarianceModel::Fbm {
            hurst: Hurst::new(hurst)?,
        })
    }

    /// Mixed model. Weights may be zero (degenerate mixtures) but not both.
    pub fn mixed(alpha: f64, beta: f64, hurst: f64) -> Result<Self> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(alpha) || !ok(beta) || (alpha == 0.0 && beta == 0.0) {
            return Err(Error::Domain(format!(
                "mixed weights must be nonnegative and not both zero, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(CovarianceModel::Mixed {
            alpha,
            beta,
            hurst: Hurst::new(hurst)?,
        })
    }

    pub fn covariance(&self, t: f64, s: f64) -> Result<f64> {
        if !(t >= 0.0 && s >= 0.0) {
            return Err(Error::Domain(format!(
                "covariance needs nonnegative times, got ({t}, {s})"
            )));
        }
        Ok(self.covariance_unchecked(t, s))
    }

    pub(crate) fn covariance_unchecked(&self, t: f64, s: f64) -> f64 {
        match *self {
            CovarianceModel::Bm => t.min(s),
            CovarianceModel::Fbm { hurst } => fbm_cov(hurst.value(), t, s),
            CovarianceModel::Mixed { alpha, beta, hurst } => {
                alpha * alpha * t.min(s) + beta * beta * fbm_cov(hurst.value(), t, s)
            }
        }
    }

    /// `E[(X_t - X_s)^2] = R(t,t) - 2R(t,s) + R(s,s)`.
    pub fn increment_variance(&self, s: f64, t: f64) -> Result<f64> {
        if s > t {
            return Err(Error::Domain(format!(
                "increment variance needs s <= t, got s={s}, t={t}"
            )));
        }
        let rtt = self.covariance(t, t)?;
        let rts = self.covariance(t, s)?;
        let rss = self.covariance(s, s)?;
        Ok(rtt - 2.0 * rts + rss)
    }

    /// Hurst exponent of the rough part; 0.5 for Brownian motion.
    pub fn hurst(&self) -> f64 {
        match *self {
            CovarianceModel::Bm => 0.5,
            CovarianceModel::Fbm { hurst } | CovarianceModel::Mixed { hurst, .. } => hurst.value(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CovarianceModel::Bm => "bm",
            CovarianceModel::Fbm { .. } => "fbm",
            CovarianceModel::Mixed { .. } => "mixed",
        }
    }

    /// Independent components with nonzero weight. Pure models have one
    /// component of weight 1.
    pub fn components(&self) -> Vec<Component> {
        match *self {
            CovarianceModel::Mixed { alpha, beta, hurst } => {
                let mut out = Vec::with_capacity(2);
                if alpha != 0.0 {
                    out.push(Component {
                        weight: alpha,
                        model: CovarianceModel::Bm,
                    });
                }
                if beta != 0.0 {
                    out.push(Component {
                        weight: beta,
                        model: CovarianceModel::Fbm { hurst },
                    });
                }
                out
            }
            pure => vec![Component {
                weight: 1.0,
                model: pure,
            }],
        }
    }
}

impl fmt::Display for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CovarianceModel::Bm => write!(f, "bm"),
            CovarianceModel::Fbm { hurst } => write!(f, "fbm(H={})", hurst.value()),
            CovarianceModel::Mixed { alpha, beta, hurst } => write!(
                f,
                "mixed(alpha={alpha}, beta={beta}, H={})",
                hurst.value()
            ),
        }
    }
}

/// Strictly increasing observation times in `(0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
    horizon: f64,
    uniform: bool,
}

impl TimeGrid {
    /// `n` equally spaced points `T/n, 2T/n, ..., T`.
    pub fn uniform(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("grid needs at least one point".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let dt = horizon / n as f64;
        let mut times: Vec<f64> = (1..=n).map(|i| i as f64 * dt).collect();
        times[n - 1] = horizon;
        Ok(TimeGrid {
            times,
            horizon,
            uniform: true,
        })
    }

    pub fn explicit(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Domain("grid needs at least one point".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(times[0] > 0.0) {
            return Err(Error::Domain(format!(
                "grid times must be positive (time 0 is degenerate), got {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("grid times must be strictly increasing".into()));
        }
        if times[times.len() - 1] > horizon {
            return Err(Error::Domain(format!(
                "last grid time {} exceeds horizon {horizon}",
                times[times.len() - 1]
            )));
        }
        Ok(TimeGrid {
            times,
            horizon,
            uniform: false,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// Index of the grid time closest to `t` and whether `t` hit it exactly
    /// (up to 1e-12 relative to the horizon).
    pub fn nearest_index(&self, t: f64) -> (usize, bool) {
        let idx = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.times.len() => self.times.len() - 1,
            Err(i) => {
                if (t - self.times[i - 1]) <= (self.times[i] - t) {
                    i - 1
                } else {
                    i
                }
            }
        };
        let exact = (self.times[idx] - t).abs() <= 1e-12 * self.horizon;
        (idx, exact)
    }
}

impl fmt::Display for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.uniform {
            write!(f, "uniform(n={}, T={})", self.times.len(), self.horizon)
        } else {
            write!(f, "explicit(n={}, T={})", self.times.len(), self.horizon)
        }
    }
}

/// Jitter ladder, as multiples of the mean diagonal.
pub const JITTER_LADDER: [f64; 5] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

/// Covariance matrix of a grid together with its lower Cholesky factor.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
    jitter_applied: f64,
}

impl GramMatrix {
    /// Factor `sigma`, escalating diagonal jitter along [`JITTER_LADDER`] if
    /// the plain factorization fails. `describe` names the model and grid in
    /// the error.
    pub fn factor(sigma: DMatrix<f64>, describe: impl Fn() -> (String, String)) -> Result<Self> {
        if let Some(ch) = Cholesky::new(sigma.clone()) {
            let chol = ch.unpack();
            return Ok(GramMatrix {
                sigma,
                chol,
                jitter_applied: 0.0,
            });
        }
        let n = sigma.nrows().max(1);
        let mean_diag = sigma.diagonal().sum() / n as f64;
        for eps in JITTER_LADDER {
            let jitter = eps * mean_diag;
            let mut shifted = sigma.clone();
            for i in 0..sigma.nrows() {
                shifted[(i, i)] += jitter;
            }
            if let Some(ch) = Cholesky::new(shifted) {
                log::warn!("Gram factorization needed jitter {jitter:e}");
                return Ok(GramMatrix {
                    sigma,
                    chol: ch.unpack(),
                    jitter_applied: jitter,
                });
            }
        }
        let (model, grid) = describe();
        Err(Error::IllConditioned {
            model,
            grid,
            jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * mean_diag,
        })
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Lower-triangular factor of `sigma + jitter·I`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter_applied
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// Gram matrix `Σ_ij = R(t_i, t_j)` of the observed process on `grid`.
pub fn build_gram(model: &CovarianceModel, grid: &TimeGrid) -> Result<GramMatrix> {
    let t = grid.times();
    let n = t.len();
    let sigma = DMatrix::from_fn(n, n, |i, j| model.covariance_unchecked(t[i], t[j]));
    GramMatrix::factor(sigma, || (model.to_string(), grid.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fbm_covariance_examples() {
        let m = CovarianceModel::fbm(0.25).unwrap();
        assert_abs_diff_eq!(m.covariance(1.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(m.covariance(1.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(m.covariance(1.0, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        let mixed = CovarianceModel::mixed(1.0, 1.0, 0.25).unwrap();
        assert_abs_diff_eq!(mixed.covariance(1.0, 1.0).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn covariance_rejects_negative_time() {
        let m = CovarianceModel::Bm;
        assert!(matches!(m.covariance(-0.1, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn hurst_bounds() {
        assert!(Hurst::new(0.0).is_err());
        assert!(Hurst::new(1.0).is_err());
        assert!(Hurst::new(f64::NAN).is_err());
        assert!(Hurst::new(0.3).is_ok());
    }

    #[test]
    fn increment_variance_examples() {
        let m = CovarianceModel::fbm(0.25).unwrap();
        assert_abs_diff_eq!(m.increment_variance(0.5, 0.75).unwrap(), 0.5, epsilon = 1e-14);
        assert_eq!(m.increment_variance(0.3, 0.3).unwrap(), 0.0);
        assert_abs_diff_eq!(
            CovarianceModel::Bm.increment_variance(0.25, 1.0).unwrap(),
            0.75,
            epsilon = 1e-15
        );
        assert!(m.increment_variance(0.8, 0.2).is_err());
    }

    #[test]
    fn gram_examples() {
        let grid = TimeGrid::explicit(vec![0.5, 1.0], 1.0).unwrap();
        let g = build_gram(&CovarianceModel::Bm, &grid).unwrap();
        assert_eq!(g.sigma().as_slice(), &[0.5, 0.5, 0.5, 1.0]);
        assert_eq!(g.jitter_applied(), 0.0);

        let one = TimeGrid::explicit(vec![1.0], 1.0).unwrap();
        let g = build_gram(&CovarianceModel::fbm(0.25).unwrap(), &one).unwrap();
        assert_abs_diff_eq!(g.sigma()[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn half_hurst_matches_brownian() {
        let grid = TimeGrid::uniform(24, 2.0).unwrap();
        let a = build_gram(&CovarianceModel::fbm(0.5).unwrap(), &grid).unwrap();
        let b = build_gram(&CovarianceModel::Bm, &grid).unwrap();
        for (x, y) in a.sigma().iter().zip(b.sigma().iter()) {
            assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::explicit(vec![0.0, 1.0], 1.0).is_err());
        assert!(TimeGrid::explicit(vec![0.5, 0.5], 1.0).is_err());
        assert!(TimeGrid::explicit(vec![0.5, 1.5], 1.0).is_err());
        assert!(TimeGrid::uniform(0, 1.0).is_err());
        let g = TimeGrid::uniform(4, 1.0).unwrap();
        assert_eq!(g.times(), &[0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.nearest_index(0.5), (1, true));
        assert_eq!(g.nearest_index(0.6), (1, false));
        assert_eq!(g.nearest_index(7.0), (3, false));
    }

    #[test]
    fn singular_gram_is_rejected() {
        // Duplicate rows make the matrix rank one; no jitter on the ladder can
        // rescue a negative-definite direction.
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = GramMatrix::factor(sigma, || ("test".into(), "grid".into())).unwrap_err();
        assert!(err.is_numerical());

        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let g = GramMatrix::factor(sigma, || ("test".into(), "grid".into())).unwrap();
        assert!(g.jitter_applied() > 0.0);
    }
}
