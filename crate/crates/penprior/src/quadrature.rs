//! Gauss–Hermite quadrature for Gaussian expectations.
//!
//! Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix of
//! the Hermite recurrence (computed by Sturm-sequence bisection); weights
//! come from the Christoffel function of the orthonormal polynomials. With
//! the physicists' weight `e^{-x^2}`, an expectation under `N(mu, sigma2)`
//! is `(1/sqrt(pi)) sum_i w_i g(mu + sqrt(2 sigma2) x_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Gauss–Hermite order.
    pub nodes: usize,
    /// Monte-Carlo sample budget for non-Gaussian posteriors.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes: 64,
            mc_samples: 1_000_000,
            seed: 0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 8 {
            return Err(Error::InvalidParameter(format!(
                "quadrature order must be >= 8, got {}",
                self.nodes
            )));
        }
        if self.mc_samples < 1_000 {
            return Err(Error::InvalidParameter(format!(
                "Monte-Carlo budget must be >= 1000, got {}",
                self.mc_samples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Counts eigenvalues of the Jacobi matrix strictly below `x`
/// (Sturm sequence for a symmetric tridiagonal matrix with zero diagonal).
fn sturm_count(n: usize, offdiag_sq: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = -x;
    if d < 0.0 {
        count += 1;
    }
    for k in 1..n {
        let denom = if d == 0.0 { f64::MIN_POSITIVE } else { d };
        d = -x - offdiag_sq[k - 1] / denom;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(
                "Gauss-Hermite order must be >= 2".into(),
            ));
        }
        // Off-diagonal b_k = sqrt(k/2); eigenvalues lie in [-R, R] by Gershgorin.
        let offdiag_sq: Vec<f64> = (1..n).map(|k| k as f64 / 2.0).collect();
        let radius = 2.0 * (n as f64 / 2.0).sqrt() + 1.0;

        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            // Bisect for the (i+1)-th smallest eigenvalue.
            let (mut lo, mut hi) = (-radius, radius);
            for _ in 0..120 {
                let mid = 0.5 * (lo + hi);
                if sturm_count(n, &offdiag_sq, mid) > i {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-16 * radius {
                    break;
                }
            }
            nodes.push(0.5 * (lo + hi));
        }
        // Enforce exact symmetry of the node set.
        for i in 0..n / 2 {
            let avg = 0.5 * (nodes[i] - nodes[n - 1 - i]);
            nodes[i] = avg;
            nodes[n - 1 - i] = -avg;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }

        // Christoffel weights: w_i = 1 / sum_{k<n} p_k(x_i)^2 with the
        // orthonormal recurrence p_0 = pi^{-1/4},
        // x p_k = sqrt((k+1)/2) p_{k+1} + sqrt(k/2) p_{k-1}.
        let weights = nodes
            .iter()
            .map(|&x| {
                let mut p_prev = 0.0f64;
                let mut p = std::f64::consts::PI.powf(-0.25);
                let mut sum = p * p;
                for k in 0..n - 1 {
                    let next = (x * p - (k as f64 / 2.0).sqrt() * p_prev)
                        / (((k + 1) as f64) / 2.0).sqrt();
                    p_prev = p;
                    p = next;
                    sum += p * p;
                }
                1.0 / sum
            })
            .collect();

        Ok(Self { nodes, weights })
    }

    /// Expectation of `g` under `N(mu, sigma2)`.
    pub fn expect(&self, mu: f64, sigma2: f64, g: impl Fn(f64) -> f64) -> f64 {
        let scale = (2.0 * sigma2).sqrt();
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * g(mu + scale * x);
        }
        acc / std::f64::consts::PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [8, 16, 64, 128] {
            let gh = GaussHermite::new(n).unwrap();
            let total: f64 = gh.weights.iter().sum();
            assert_abs_diff_eq!(total, std::f64::consts::PI.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_moments_are_exact() {
        let gh = GaussHermite::new(32).unwrap();
        let (mu, s2) = (1.3, 0.7);
        assert_abs_diff_eq!(gh.expect(mu, s2, |x| x), mu, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.expect(mu, s2, |x| x * x), s2 + mu * mu, epsilon = 1e-12);
        assert_abs_diff_eq!(
            gh.expect(mu, s2, |x| x.powi(4)),
            mu.powi(4) + 6.0 * mu * mu * s2 + 3.0 * s2 * s2,
            epsilon = 1e-10
        );
    }

    #[test]
    fn smooth_nonpolynomial_integrand_converges() {
        let gh = GaussHermite::new(64).unwrap();
        // E[cos X] under N(0,1) = e^{-1/2}.
        assert_abs_diff_eq!(
            gh.expect(0.0, 1.0, f64::cos),
            (-0.5f64).exp(),
            epsilon = 1e-12
        );
    }
}
