use nalgebra::{DMatrix, SymmetricEigen};

/// Default number of Gauss–Hermite nodes per dimension.
pub const DEFAULT_NODES: usize = 32;

/// Gauss–Hermite rule for the standard normal weight: `E[g(Z)] ≈ Σ w_i g(x_i)`
/// with `Σ w_i = 1`. Exact for polynomials of degree `< 2n`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Nodes and weights from the eigen-decomposition of the Jacobi matrix of the
/// probabilists' Hermite recurrence `x He_k = He_{k+1} + k He_{k-1}`.
pub fn gauss_hermite(n: usize) -> GaussHermite {
    assert!(n >= 1, "need at least one node");
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize: the rule is exactly symmetric about zero.
    for k in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - k].0 - pairs[k].0);
        let w = 0.5 * (pairs[n - 1 - k].1 + pairs[k].1);
        pairs[k] = (-x, w);
        pairs[n - 1 - k] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    GaussHermite {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    }
}

impl GaussHermite {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Tensor-product expectation over `dim` independent standard normals.
    pub fn expect(&self, dim: usize, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_node(dim, |z, w| acc += w * g(z));
        acc
    }

    /// Visit every node `z` of the `dim`-fold tensor rule with its weight.
    pub fn for_each_node(&self, dim: usize, mut f: impl FnMut(&[f64], f64)) {
        if dim == 0 {
            f(&[], 1.0);
            return;
        }
        let n = self.len();
        let mut idx = vec![0usize; dim];
        let mut z = vec![self.nodes[0]; dim];
        loop {
            let w: f64 = idx.iter().map(|&i| self.weights[i]).product();
            f(&z, w);
            // odometer increment
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < n {
                    z[k] = self.nodes[idx[k]];
                    break;
                }
                idx[k] = 0;
                z[k] = self.nodes[0];
                k += 1;
                if k == dim {
                    return;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn double_factorial(k: u32) -> f64 {
        (1..=k).rev().step_by(2).map(f64::from).product()
    }

    #[test]
    fn moments_are_exact() {
        let rule = gauss_hermite(DEFAULT_NODES);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for p in 0..20u32 {
            let got = rule.expect(1, |z| z[0].powi(p as i32));
            let want = if p % 2 == 1 { 0.0 } else { double_factorial(p.saturating_sub(1)) };
            assert!(
                (got - want).abs() <= 1e-10 * double_factorial(p + p % 2).max(1.0),
                "moment {p}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn cosine_expectation() {
        // E[cos(Z)] = e^{-1/2}
        let rule = gauss_hermite(DEFAULT_NODES);
        assert_relative_eq!(rule.expect(1, |z| z[0].cos()), (-0.5f64).exp(), epsilon = 1e-13);
        // E[cos(Z1 + Z2)] = e^{-1}
        assert_relative_eq!(rule.expect(2, |z| (z[0] + z[1]).cos()), (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn small_rules() {
        let one = gauss_hermite(1);
        assert_eq!(one.nodes, vec![0.0]);
        let two = gauss_hermite(2);
        assert_relative_eq!(two.nodes[1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(two.weights[0], 0.5, epsilon = 1e-14);
    }
}
