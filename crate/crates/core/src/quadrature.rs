//! Gauss–Hermite rules for Gaussian expectations.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

/// Order used by the nonlinear expectation.
pub const DEFAULT_ORDER: usize = 64;

/// Nodes and weights of an `n`-point rule for `∫ f(x) e^{-x²} dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch construction from the Jacobi matrix of the Hermite polynomials.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "rule order must be positive");
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            let b = (i as f64 / 2.0).sqrt();
            jacobi[(i, i - 1)] = b;
            jacobi[(i - 1, i)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mu0 = std::f64::consts::PI.sqrt();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (eig.eigenvalues[k], mu0 * eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // the rule is symmetric; averaging mirrored pairs removes eigensolver noise
        let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussHermite { nodes, weights }
    }

    /// Shared rule of [`DEFAULT_ORDER`].
    pub fn default_rule() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(DEFAULT_ORDER))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `E φ(X)` for `X ~ N(mean, variance)`.
    ///
    /// ```
    /// use roughctrl::quadrature::GaussHermite;
    /// let rule = GaussHermite::new(20);
    /// let second = rule.gaussian_expectation(|x| x * x, 1.0, 4.0);
    /// assert!((second - 5.0).abs() < 1e-12);
    /// ```
    pub fn gaussian_expectation(&self, phi: impl Fn(f64) -> f64, mean: f64, variance: f64) -> f64 {
        let scale = (2.0 * variance.max(0.0)).sqrt();
        let s: f64 = self.nodes.iter().zip(&self.weights).map(|(x, w)| w * phi(mean + scale * x)).sum();
        s / std::f64::consts::PI.sqrt()
    }
}
