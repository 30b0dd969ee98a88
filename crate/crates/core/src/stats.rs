//! Sample statistics used by the experiments. All reductions are sequential
//! over a fixed ordering, so they are bit-reproducible.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Fourth central moment (biased).
    pub m4: f64,
}

impl Summary {
    pub fn from_slice(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Summary {
                n,
                mean: f64::NAN,
                variance: f64::NAN,
                m4: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let (mut s2, mut s4) = (0.0, 0.0);
        for &x in xs {
            let d = x - mean;
            let d2 = d * d;
            s2 += d2;
            s4 += d2 * d2;
        }
        let variance = if n > 1 { s2 / (n - 1) as f64 } else { 0.0 };
        Summary {
            n,
            mean,
            variance,
            m4: s4 / n as f64,
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }

    /// Sample variance and its standard error `sqrt((m4 - s^4) / n)`.
    pub fn variance_with_se(&self) -> (f64, f64) {
        let s4 = self.variance * self.variance;
        (self.variance, ((self.m4 - s4).max(0.0) / self.n as f64).sqrt())
    }

    /// Mean of squares `E[x^2]` is not kept; callers square first.
    pub fn mean_with_se(&self) -> (f64, f64) {
        (self.mean, self.se())
    }
}

/// Pearson correlation and its large-sample standard error `(1 - r^2)/sqrt(n)`.
pub fn correlation_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len().min(b.len());
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (x, y) = (a[i] - ma, b[i] - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    let r = if saa > 0.0 && sbb > 0.0 {
        sab / (saa * sbb).sqrt()
    } else {
        0.0
    };
    (r, (1.0 - r * r) / (n as f64).sqrt())
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Kolmogorov–Smirnov distance between the sample and `N(0, variance)`.
pub fn ks_normal(sample: &[f64], variance: f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let sd = variance.sqrt();
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal_cdf(x / sd);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn summary_basics() {
        let s = Summary::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_abs_diff_eq!(s.variance, 5.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.se(), (5.0 / 12.0f64).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = linear_fit(&x, &y);
        assert_abs_diff_eq!(f.slope, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.intercept, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn normal_cdf_values() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_cdf(1.959963984540054), 0.975, epsilon = 1e-12);
    }

    #[test]
    fn ks_of_quantiles_is_small() {
        // midpoint quantiles of N(0, 4) have KS distance exactly 1/(2n)
        let n = 200;
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                // invert by bisection
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if normal_cdf(mid) < p { lo = mid } else { hi = mid }
                }
                2.0 * 0.5 * (lo + hi)
            })
            .collect();
        assert_abs_diff_eq!(ks_normal(&xs, 4.0), 0.5 / n as f64, epsilon = 1e-9);
    }
}
