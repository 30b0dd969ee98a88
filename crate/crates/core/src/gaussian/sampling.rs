use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use super::rng::RngStream;
use crate::energy::GramContext;
use crate::error::{Error, Result};
use crate::model::{CovarianceModel, TimeGrid};
use crate::par::{for_each_chunk, CHUNK};

/// `m` sampled paths over the coordinates of a context, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    data: Vec<f64>,
    m: usize,
    n: usize,
    seed: u64,
    model: String,
}

impl PathEnsemble {
    pub fn from_raw(data: Vec<f64>, m: usize, n: usize, seed: u64, model: String) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::Dimension {
                expected: m * n,
                got: data.len(),
            });
        }
        Ok(PathEnsemble {
            data,
            m,
            n,
            seed,
            model,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1)).take(self.m)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Values of coordinate `k` across all paths.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }
}

/// Rows i.i.d. `N(0, Σ)` drawn as `L z`. Chunk `c` of [`CHUNK`] rows uses the
/// stream `rng.child(c)`, so the ensemble depends only on `(seed, stream, m)`
/// and the context.
pub fn sample_ensemble(ctx: &GramContext, m: usize, rng: RngStream) -> Result<PathEnsemble> {
    if m == 0 {
        return Err(Error::Domain("ensemble needs at least one path".into()));
    }
    let n = ctx.dim();
    let l = ctx.gram().chol();
    let mut data = vec![0.0; m * n];
    for_each_chunk(&mut data, CHUNK * n, |c, chunk| {
        let mut r = rng.child(c as u64).rng();
        let mut z = vec![0.0; n];
        for row in chunk.chunks_mut(n) {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut r);
            }
            for (i, out) in row.iter_mut().enumerate() {
                let li = l.row(i);
                let mut acc = 0.0;
                for k in 0..=i {
                    acc += li[k] * z[k];
                }
                *out = acc;
            }
        }
    });
    PathEnsemble::from_raw(data, m, n, rng.seed, ctx.model().to_string())
}

/// Outcome details of the circulant sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CirculantInfo {
    /// Smallest eigenvalue of the embedding divided by the largest.
    pub min_eigen_ratio: f64,
    /// True when the embedding was not PSD and the Cholesky sampler was used.
    pub fell_back: bool,
}

/// Autocovariance of fractional Gaussian noise at lag `k` for unit spacing.
fn fgn_autocov(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let p = 2.0 * h;
    0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
}

/// fBM on a uniform grid via circulant embedding of the increment
/// autocovariance (Davies–Harte). Each FFT yields two independent paths from
/// its real and imaginary parts; paths are cumulative sums of the increments.
pub fn sample_ensemble_circulant(
    model: &CovarianceModel,
    grid: &TimeGrid,
    m: usize,
    rng: RngStream,
) -> Result<(PathEnsemble, CirculantInfo)> {
    let hurst = match model {
        CovarianceModel::Fbm { hurst } => hurst.value(),
        CovarianceModel::Bm => 0.5,
        CovarianceModel::Mixed { .. } => {
            return Err(Error::Unsupported(
                "circulant sampler needs a pure fBM model".into(),
            ))
        }
    };
    if !grid.is_uniform() {
        return Err(Error::Unsupported(
            "circulant sampler needs a uniform grid".into(),
        ));
    }
    if m == 0 {
        return Err(Error::Domain("ensemble needs at least one path".into()));
    }
    let n = grid.len();
    let size = 2 * n;
    let dt = grid.horizon() / n as f64;
    let scale = dt.powf(hurst);

    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|k| {
            let lag = if k <= n { k } else { size - k };
            Complex::new(fgn_autocov(hurst, lag), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft: Arc<dyn Fft<f64>> = planner.plan_fft_forward(size);
    fft.process(&mut row);
    let eig: Vec<f64> = row.iter().map(|c| c.re).collect();
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    let info = CirculantInfo {
        min_eigen_ratio: min / max,
        fell_back: min < -1e-9 * max,
    };
    if info.fell_back {
        log::warn!("circulant embedding not PSD (min/max = {:e}); using Cholesky", info.min_eigen_ratio);
        let ctx = GramContext::new(*model, grid.clone())?;
        return Ok((sample_ensemble(&ctx, m, rng)?, info));
    }
    let amp: Vec<f64> = eig
        .iter()
        .map(|&l| (l.max(0.0) / size as f64).sqrt())
        .collect();

    let mut data = vec![0.0; m * n];
    for_each_chunk(&mut data, CHUNK * n, |c, chunk| {
        let mut r = rng.child(c as u64).rng();
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut rows = chunk.chunks_mut(n);
        while let Some(first) = rows.next() {
            let second = rows.next();
            for (b, &a) in buf.iter_mut().zip(&amp) {
                let re: f64 = StandardNormal.sample(&mut r);
                let im: f64 = StandardNormal.sample(&mut r);
                *b = Complex::new(a * re, a * im);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            let mut acc = 0.0;
            for (out, b) in first.iter_mut().zip(&buf) {
                acc += scale * b.re;
                *out = acc;
            }
            if let Some(second) = second {
                let mut acc = 0.0;
                for (out, b) in second.iter_mut().zip(&buf) {
                    acc += scale * b.im;
                    *out = acc;
                }
            }
        }
    });
    Ok((
        PathEnsemble::from_raw(data, m, n, rng.seed, model.to_string())?,
        info,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Summary;

    fn ctx(h: f64, n: usize) -> GramContext {
        GramContext::new(CovarianceModel::fbm(h).unwrap(), TimeGrid::uniform(n, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn cholesky_marginals() {
        let ctx = ctx(0.25, 16);
        let m = 100_000;
        let ens = sample_ensemble(&ctx, m, RngStream::new(11, 0)).unwrap();
        for i in [0, 7, 15] {
            let s = Summary::from_slice(&ens.column(i));
            let sd = ctx.sigma()[(i, i)].sqrt();
            assert!(s.mean.abs() <= 4.0 * sd / (m as f64).sqrt(), "mean {i}: {}", s.mean);
            let (var, se) = s.variance_with_se();
            assert!((var - ctx.sigma()[(i, i)]).abs() <= 5.0 * se, "var {i}: {var} ± {se}");
        }
    }

    #[test]
    fn ensemble_is_deterministic_across_worker_counts() {
        let ctx = ctx(0.3, 12);
        let a = crate::par::with_workers(1, || sample_ensemble(&ctx, 1000, RngStream::new(5, 2)).unwrap());
        let b = crate::par::with_workers(3, || sample_ensemble(&ctx, 1000, RngStream::new(5, 2)).unwrap());
        assert_eq!(a, b);
        let c = sample_ensemble(&ctx, 1000, RngStream::new(6, 2)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn circulant_brownian_increments_uncorrelated() {
        let grid = TimeGrid::uniform(32, 1.0).unwrap();
        let m = 100_000;
        let (ens, info) =
            sample_ensemble_circulant(&CovarianceModel::fbm(0.5).unwrap(), &grid, m, RngStream::new(3, 1)).unwrap();
        assert!(!info.fell_back);
        let a: Vec<f64> = ens.rows().map(|r| r[10] - r[9]).collect();
        let b: Vec<f64> = ens.rows().map(|r| r[11] - r[10]).collect();
        let (rho, se) = crate::stats::correlation_with_se(&a, &b);
        assert!(rho.abs() <= 5.0 * se, "lag-1 correlation {rho} ± {se}");
    }

    #[test]
    fn circulant_rejects_mixed_and_nonuniform() {
        let grid = TimeGrid::explicit(vec![0.1, 0.5, 1.0], 1.0).unwrap();
        let m = CovarianceModel::fbm(0.3).unwrap();
        assert!(sample_ensemble_circulant(&m, &grid, 10, RngStream::new(0, 0)).is_err());
        let mixed = CovarianceModel::mixed(1.0, 1.0, 0.3).unwrap();
        let grid = TimeGrid::uniform(8, 1.0).unwrap();
        assert!(sample_ensemble_circulant(&mixed, &grid, 10, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn odd_path_count() {
        let grid = TimeGrid::uniform(8, 1.0).unwrap();
        let (ens, _) =
            sample_ensemble_circulant(&CovarianceModel::fbm(0.3).unwrap(), &grid, 5, RngStream::new(0, 0)).unwrap();
        assert_eq!(ens.len(), 5);
        assert!(ens.as_slice().iter().all(|x| x.is_finite()));
    }
}
